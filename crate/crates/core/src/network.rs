//! Feed-forward networks, crash patterns and (crash-degraded) evaluation.
//!
//! A network has `L >= 1` hidden layers followed by a linear output layer
//! without bias. Layer `l` computes
//!
//! ```text
//! s_j = (sum_i w_ji * y_i) + b_j        y_j = phi(s_j)
//! ```
//!
//! with the sum taken in ascending `i` starting from `+0.0` and the bias added
//! once. A crashed neuron emits exactly `0.0` to every downstream consumer.
//!
//! Layer and neuron indices are 0-based throughout the crate API.

use std::collections::BTreeSet;
use std::fmt;

use crate::activation::Activation;
use crate::error::{Error, Result};

/// Dense row-major matrix, `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    /// Builds a matrix from rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::Shape(format!(
                "ragged matrix: row {i} has {} entries, row 0 has {cols}",
                r.len()
            )));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// `out[r] = sum_c self[r][c] * x[c]`, summed left to right from `+0.0`.
    #[inline]
    pub(crate) fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), x);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// One hidden layer: `weights` is `N_l x N_{l-1}`, `biases` has length `N_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, biases: Vec<f64>) -> Self {
        Self { weights, biases }
    }

    pub fn width(&self) -> usize {
        self.weights.rows()
    }
}

/// A feed-forward network with a linear, bias-free output layer.
///
/// Fields are public so that malformed networks can be described and then
/// checked with [`Network::validate`]; [`Network::new`] only accepts valid ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_dim: usize,
    pub layers: Vec<DenseLayer>,
    /// `N_out x N_L`.
    pub output_weights: Matrix,
    pub activation: Activation,
}

/// A broken network invariant, as reported by [`Network::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoLayers,
    ZeroInputDim,
    /// `layer` is the 0-based hidden layer index, or `L` for the output layer.
    Shape { layer: usize, message: String },
    NonFinite { layer: usize, what: &'static str, row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoLayers => write!(f, "network has no hidden layer"),
            Violation::ZeroInputDim => write!(f, "input dimension is 0"),
            Violation::Shape { layer, message } => write!(f, "layer {layer}: {message}"),
            Violation::NonFinite { layer, what, row, col } => {
                write!(f, "layer {layer}: non-finite {what} at ({row}, {col})")
            }
        }
    }
}

/// Per-layer weight magnitude statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStats {
    pub max_abs: f64,
    pub mean_abs: f64,
}

/// Pre-activations, activations and output of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Network {
    pub fn new(
        input_dim: usize,
        layers: Vec<DenseLayer>,
        output_weights: Matrix,
        activation: Activation,
    ) -> Result<Self> {
        let net = Self { input_dim, layers, output_weights, activation };
        net.check()?;
        Ok(net)
    }

    /// Every invariant violation; empty means the network is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.input_dim == 0 {
            out.push(Violation::ZeroInputDim);
        }
        if self.layers.is_empty() {
            out.push(Violation::NoLayers);
        }
        let mut prev = self.input_dim;
        for (l, layer) in self.layers.iter().enumerate() {
            let (rows, cols) = (layer.weights.rows(), layer.weights.cols());
            if rows == 0 {
                out.push(Violation::Shape { layer: l, message: "width is 0".into() });
            }
            if cols != prev {
                out.push(Violation::Shape {
                    layer: l,
                    message: format!("weights are {rows}x{cols}, expected {rows}x{prev}"),
                });
            }
            if layer.biases.len() != rows {
                out.push(Violation::Shape {
                    layer: l,
                    message: format!("{} biases for {rows} neurons", layer.biases.len()),
                });
            }
            push_non_finite(&mut out, l, "weight", &layer.weights);
            for (j, b) in layer.biases.iter().enumerate() {
                if !b.is_finite() {
                    out.push(Violation::NonFinite { layer: l, what: "bias", row: j, col: 0 });
                }
            }
            prev = rows;
        }
        let out_l = self.layers.len();
        let ow = &self.output_weights;
        if ow.rows() == 0 {
            out.push(Violation::Shape { layer: out_l, message: "output dimension is 0".into() });
        }
        if ow.cols() != prev {
            out.push(Violation::Shape {
                layer: out_l,
                message: format!(
                    "output weights are {}x{}, expected {}x{prev}",
                    ow.rows(),
                    ow.cols(),
                    ow.rows()
                ),
            });
        }
        push_non_finite(&mut out, out_l, "output weight", ow);
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v.iter().map(ToString::to_string).collect()))
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(DenseLayer::width).collect()
    }

    pub fn output_dim(&self) -> usize {
        self.output_weights.rows()
    }

    /// Total number of hidden neurons, the crash-eligible population.
    pub fn hidden_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::width).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<LayerTrace> {
        self.check()?;
        self.check_input(input)?;
        Ok(self.trace(input, None))
    }

    /// Output with every neuron of `pattern` forced to emit 0.
    pub fn forward_failed(&self, input: &[f64], pattern: &CrashPattern) -> Result<Vec<f64>> {
        self.check()?;
        self.check_input(input)?;
        pattern.check_against(self)?;
        Ok(self.trace(input, Some(pattern)).output)
    }

    /// Like [`forward_failed`](Self::forward_failed) but keeps the whole trace.
    pub fn forward_failed_trace(&self, input: &[f64], pattern: &CrashPattern) -> Result<LayerTrace> {
        self.check()?;
        self.check_input(input)?;
        pattern.check_against(self)?;
        Ok(self.trace(input, Some(pattern)))
    }

    pub(crate) fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_dim
            )));
        }
        if let Some(i) = input.iter().position(|x| !x.is_finite()) {
            return Err(Error::Shape(format!("input component {i} is not finite")));
        }
        Ok(())
    }

    /// Unchecked evaluation; callers guarantee shapes.
    pub(crate) fn trace(&self, input: &[f64], pattern: Option<&CrashPattern>) -> LayerTrace {
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let prev: &[f64] = if l == 0 { input } else { &activations[l - 1] };
            let mut s = vec![0.0; layer.width()];
            layer.weights.mul_vec_into(prev, &mut s);
            for (sj, b) in s.iter_mut().zip(&layer.biases) {
                *sj += b;
            }
            let mut y: Vec<f64> = s.iter().map(|&x| self.activation.apply(x)).collect();
            if let Some(p) = pattern {
                for &j in p.crashed_in(l) {
                    y[j] = 0.0;
                }
            }
            pre_activations.push(s);
            activations.push(y);
        }
        let mut output = vec![0.0; self.output_dim()];
        self.output_weights.mul_vec_into(activations.last().expect("L >= 1"), &mut output);
        LayerTrace { pre_activations, activations, output }
    }

    /// Crash-degraded output computed from a nominal trace: layers before the
    /// first crashed layer are reused, later ones recomputed. Bitwise equal to
    /// [`forward_failed`](Self::forward_failed).
    pub(crate) fn failed_output_from(
        &self,
        nominal: &[Vec<f64>],
        crashed: &[Vec<usize>],
        scratch: &mut Scratch,
        out: &mut [f64],
    ) {
        let Some(first) = crashed.iter().position(|c| !c.is_empty()) else {
            self.output_weights.mul_vec_into(&nominal[nominal.len() - 1], out);
            return;
        };
        scratch.cur.clear();
        scratch.cur.extend_from_slice(&nominal[first]);
        for &j in &crashed[first] {
            scratch.cur[j] = 0.0;
        }
        for l in first + 1..self.layers.len() {
            let layer = &self.layers[l];
            scratch.next.resize(layer.width(), 0.0);
            layer.weights.mul_vec_into(&scratch.cur, &mut scratch.next);
            for (sj, b) in scratch.next.iter_mut().zip(&layer.biases) {
                *sj = self.activation.apply(*sj + b);
            }
            for &j in &crashed[l] {
                scratch.next[j] = 0.0;
            }
            std::mem::swap(&mut scratch.cur, &mut scratch.next);
        }
        self.output_weights.mul_vec_into(&scratch.cur, out);
    }

    /// Max and mean absolute incoming weight for layers `1..=L` and the output
    /// layer (last entry).
    pub fn layer_weight_stats(&self) -> Vec<WeightStats> {
        self.layers
            .iter()
            .map(|l| &l.weights)
            .chain(std::iter::once(&self.output_weights))
            .map(|m| weight_stats(m.as_slice()))
            .collect()
    }

    /// Copy with every synapse leaving a crashed neuron set to zero.
    pub fn zero_outgoing(&self, pattern: &CrashPattern) -> Result<Network> {
        pattern.check_against(self)?;
        let mut net = self.clone();
        for l in 0..net.layers.len() {
            let crashed = pattern.crashed_in(l).to_vec();
            let target = if l + 1 < net.layers.len() {
                &mut net.layers[l + 1].weights
            } else {
                &mut net.output_weights
            };
            for r in 0..target.rows() {
                for &c in &crashed {
                    target.set(r, c, 0.0);
                }
            }
        }
        Ok(net)
    }
}

fn push_non_finite(out: &mut Vec<Violation>, layer: usize, what: &'static str, m: &Matrix) {
    for (k, w) in m.as_slice().iter().enumerate() {
        if !w.is_finite() {
            let cols = m.cols().max(1);
            out.push(Violation::NonFinite { layer, what, row: k / cols, col: k % cols });
        }
    }
}

fn weight_stats(ws: &[f64]) -> WeightStats {
    if ws.is_empty() {
        return WeightStats { max_abs: 0.0, mean_abs: 0.0 };
    }
    let max_abs = ws.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let sum: f64 = ws.iter().map(|w| w.abs()).sum();
    WeightStats { max_abs, mean_abs: sum / ws.len() as f64 }
}

/// Reusable buffers for [`Network::failed_output_from`].
#[derive(Debug, Default, Clone)]
pub(crate) struct Scratch {
    cur: Vec<f64>,
    next: Vec<f64>,
}

/// A hidden neuron address (0-based layer, 0-based index within the layer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NeuronId {
    pub layer: usize,
    pub index: usize,
}

impl NeuronId {
    pub fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

/// A set of crashed hidden neurons, stored per layer in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CrashPattern {
    per_layer: Vec<Vec<usize>>,
}

impl CrashPattern {
    pub fn empty(num_layers: usize) -> Self {
        Self { per_layer: vec![Vec::new(); num_layers] }
    }

    /// Builds a pattern for `net`, rejecting out-of-range and duplicate entries.
    pub fn new(net: &Network, crashed: impl IntoIterator<Item = NeuronId>) -> Result<Self> {
        let widths = net.widths();
        let mut seen = BTreeSet::new();
        for id in crashed {
            if id.layer >= widths.len() {
                return Err(Error::Pattern(format!(
                    "layer {} out of range (network has {} hidden layers)",
                    id.layer,
                    widths.len()
                )));
            }
            if id.index >= widths[id.layer] {
                return Err(Error::Pattern(format!(
                    "neuron {} out of range in layer {} of width {}",
                    id.index, id.layer, widths[id.layer]
                )));
            }
            if !seen.insert(id) {
                return Err(Error::Pattern(format!(
                    "neuron ({}, {}) listed twice",
                    id.layer, id.index
                )));
            }
        }
        let mut per_layer = vec![Vec::new(); widths.len()];
        for id in seen {
            per_layer[id.layer].push(id.index);
        }
        Ok(Self { per_layer })
    }

    /// Builds a pattern from flat neuron indices, numbering hidden neurons
    /// layer by layer (`0..net.hidden_count()`).
    pub fn from_flat(net: &Network, flat: &[usize]) -> Result<Self> {
        let offsets = layer_offsets(&net.widths());
        let total = *offsets.last().expect("offsets");
        let ids = flat
            .iter()
            .map(|&k| {
                if k >= total {
                    return Err(Error::Pattern(format!(
                        "flat neuron index {k} out of range ({total} hidden neurons)"
                    )));
                }
                let layer = offsets.partition_point(|&o| o <= k) - 1;
                Ok(NeuronId::new(layer, k - offsets[layer]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(net, ids)
    }

    pub fn crashed_in(&self, layer: usize) -> &[usize] {
        self.per_layer.get(layer).map_or(&[], Vec::as_slice)
    }

    pub fn per_layer(&self) -> &[Vec<usize>] {
        &self.per_layer
    }

    /// `(f_1, ..., f_L)`.
    pub fn per_layer_counts(&self) -> Vec<usize> {
        self.per_layer.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.per_layer.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.per_layer
            .iter()
            .enumerate()
            .flat_map(|(l, c)| c.iter().map(move |&j| NeuronId::new(l, j)))
    }

    pub(crate) fn check_against(&self, net: &Network) -> Result<()> {
        let widths = net.widths();
        if self.per_layer.len() != widths.len() {
            return Err(Error::Pattern(format!(
                "pattern covers {} layers, network has {}",
                self.per_layer.len(),
                widths.len()
            )));
        }
        for (l, (c, &w)) in self.per_layer.iter().zip(&widths).enumerate() {
            if c.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::Pattern(format!("layer {l} indices not strictly ascending")));
            }
            if c.last().is_some_and(|&j| j >= w) {
                return Err(Error::Pattern(format!("layer {l} index out of range for width {w}")));
            }
        }
        Ok(())
    }
}

/// Prefix sums of layer widths: `offsets[l]` is the flat index of layer `l`'s
/// first neuron; the last entry is the total.
pub(crate) fn layer_offsets(widths: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(widths.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for w in widths {
        acc += w;
        offsets.push(acc);
    }
    offsets
}
