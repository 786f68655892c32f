//! Mini-batch SGD with backpropagation and inverted dropout.
//!
//! Loss is `mean_examples 1/2 sum_k (out_k - onehot_k)^2` on the linear output.
//! Dropout drops each hidden neuron independently with probability `p` and
//! divides survivors by `1 - p` during training only; evaluation always runs
//! the plain network.

use rayon::prelude::*;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::network::{dot, Matrix, Network};
use crate::netgen::TopologySpec;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Stop as soon as the full training loss reaches this value.
    pub target_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, epochs: 20, batch_size: 32, dropout_rate: 0.0, seed: 0, target_loss: None }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Domain(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Domain("epochs and batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Domain(format!("dropout rate must lie in [0, 1), got {}", self.dropout_rate)));
        }
        Ok(())
    }
}

/// Inputs in `[0,1]^d` with class labels; targets are one-hot vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape(format!("{} inputs but {} labels", inputs.len(), labels.len())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Domain(format!("label {l} out of range for {num_classes} classes")));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|x| x.len() != first.len()) {
                return Err(Error::Shape("inputs have differing dimensions".into()));
            }
        }
        Ok(Self { inputs, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.num_classes];
        t[self.labels[i]] = 1.0;
        t
    }

    /// The first `n` examples (or all, if fewer).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self { inputs: self.inputs[..n].to_vec(), labels: self.labels[..n].to_vec(), num_classes: self.num_classes }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    fn check_for(&self, net: &Network) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Domain("dataset is empty".into()));
        }
        if net.output_dim() != self.num_classes {
            return Err(Error::Shape(format!(
                "network has {} outputs, dataset has {} classes",
                net.output_dim(),
                self.num_classes
            )));
        }
        if self.input_dim() != Some(net.input_dim) {
            return Err(Error::Shape(format!(
                "dataset inputs have dimension {:?}, network expects {}",
                self.input_dim(),
                net.input_dim
            )));
        }
        Ok(())
    }
}

/// Per-layer keep flags plus the survivor scale applied during training.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub keep: Vec<Vec<bool>>,
    pub scale: f64,
}

impl DropoutMask {
    pub fn sample(widths: &[usize], rate: f64, rng: &mut SeededRng) -> Self {
        let keep = widths.iter().map(|&w| (0..w).map(|_| !rng.bernoulli(rate)).collect()).collect();
        Self { keep, scale: 1.0 / (1.0 - rate) }
    }

    pub fn keep_all(widths: &[usize]) -> Self {
        Self { keep: widths.iter().map(|&w| vec![true; w]).collect(), scale: 1.0 }
    }
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub output_weights: Matrix,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Matrix::zeros(l.weights.rows(), l.weights.cols())).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.width()]).collect(),
            output_weights: Matrix::zeros(net.output_weights.rows(), net.output_weights.cols()),
        }
    }
}

pub fn loss(net: &Network, batch: &LabeledDataset) -> Result<f64> {
    net.check()?;
    batch.check_for(net)?;
    let mut total = KahanSum::new();
    for (i, x) in batch.inputs.iter().enumerate() {
        let out = net.trace(x, None).output;
        total.add(example_loss(&out, batch.labels[i]));
    }
    Ok(total.value() / batch.len() as f64)
}

fn example_loss(out: &[f64], label: usize) -> f64 {
    let mut s = 0.0;
    for (k, o) in out.iter().enumerate() {
        let t = if k == label { 1.0 } else { 0.0 };
        s += (o - t) * (o - t);
    }
    0.5 * s
}

/// Fraction of examples whose arg-max output equals the label (ties go to
/// the lowest index).
pub fn accuracy(net: &Network, data: &LabeledDataset) -> Result<f64> {
    net.check()?;
    data.check_for(net)?;
    let correct = data
        .inputs
        .iter()
        .zip(&data.labels)
        .filter(|(x, &label)| argmax(&net.trace(x, None).output) == label)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Exact gradient of the batch loss, optionally under a dropout mask.
pub fn backward(net: &Network, batch: &LabeledDataset, mask: Option<&DropoutMask>) -> Result<Gradients> {
    net.check()?;
    batch.check_for(net)?;
    if let Some(m) = mask {
        let widths: Vec<usize> = m.keep.iter().map(Vec::len).collect();
        if widths != net.widths() {
            return Err(Error::Shape(format!("mask widths {widths:?} do not match network {:?}", net.widths())));
        }
    }
    let indices: Vec<usize> = (0..batch.len()).collect();
    let mut grads = Gradients::zeros_like(net);
    let mut work = Workspace::new(net);
    accumulate(net, batch, &indices, mask, &mut grads, &mut work);
    Ok(grads)
}

struct Workspace {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    out: Vec<f64>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(net: &Network) -> Self {
        let widths = net.widths();
        Self {
            pre: widths.iter().map(|&w| vec![0.0; w]).collect(),
            act: widths.iter().map(|&w| vec![0.0; w]).collect(),
            out: vec![0.0; net.output_dim()],
            delta: widths.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }
}

/// Adds the gradient of `mean over indices` of the loss into `grads`.
fn accumulate(
    net: &Network,
    data: &LabeledDataset,
    indices: &[usize],
    mask: Option<&DropoutMask>,
    grads: &mut Gradients,
    w: &mut Workspace,
) {
    let inv_b = 1.0 / indices.len() as f64;
    let depth = net.depth();
    let act = net.activation;
    for &i in indices {
        let x = &data.inputs[i];
        // Forward pass with the mask applied to emitted activations.
        for l in 0..depth {
            let layer = &net.layers[l];
            let (prev_act, rest) = w.act.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &prev_act[l - 1] };
            let y = &mut rest[0];
            for j in 0..layer.width() {
                let s = dot(layer.weights.row(j), input) + layer.biases[j];
                w.pre[l][j] = s;
                y[j] = match mask {
                    Some(m) if !m.keep[l][j] => 0.0,
                    Some(m) => act.apply(s) * m.scale,
                    None => act.apply(s),
                };
            }
        }
        let last = &w.act[depth - 1];
        for k in 0..net.output_dim() {
            w.out[k] = dot(net.output_weights.row(k), last);
        }
        // Output layer.
        let label = data.labels[i];
        let d_last = &mut w.delta[depth - 1];
        d_last.iter_mut().for_each(|d| *d = 0.0);
        for k in 0..net.output_dim() {
            let t = if k == label { 1.0 } else { 0.0 };
            let g = (w.out[k] - t) * inv_b;
            let row = net.output_weights.row(k);
            for (c, &y) in last.iter().enumerate() {
                let idx = k * last.len() + c;
                grads.output_weights.as_mut_slice()[idx] += g * y;
                d_last[c] += g * row[c];
            }
        }
        // Hidden layers, from the top down. `delta[l]` holds dL/dy on entry and
        // dL/ds after the activation step.
        for l in (0..depth).rev() {
            for j in 0..net.layers[l].width() {
                let through = match mask {
                    Some(m) if !m.keep[l][j] => 0.0,
                    Some(m) => m.scale,
                    None => 1.0,
                };
                w.delta[l][j] *= through * act.derivative(w.pre[l][j]);
            }
            let (below, here) = w.delta.split_at_mut(l);
            let ds = &here[0];
            let input: &[f64] = if l == 0 { x } else { &w.act[l - 1] };
            let layer = &net.layers[l];
            let gw = grads.weights[l].as_mut_slice();
            let cols = layer.weights.cols();
            for (j, &d) in ds.iter().enumerate() {
                grads.biases[l][j] += d;
                if d == 0.0 {
                    continue;
                }
                for (c, &xv) in input.iter().enumerate() {
                    gw[j * cols + c] += d * xv;
                }
            }
            if l > 0 {
                let dy = &mut below[l - 1];
                dy.iter_mut().for_each(|v| *v = 0.0);
                for (j, &d) in ds.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (c, &wv) in layer.weights.row(j).iter().enumerate() {
                        dy[c] += d * wv;
                    }
                }
            }
        }
    }
}

/// Batch loss with an optional dropout mask applied to hidden activations.
pub fn masked_loss(net: &Network, batch: &LabeledDataset, mask: Option<&DropoutMask>) -> Result<f64> {
    net.check()?;
    batch.check_for(net)?;
    let act = net.activation;
    let mut total = KahanSum::new();
    for (i, x) in batch.inputs.iter().enumerate() {
        let mut y = x.clone();
        for (l, layer) in net.layers.iter().enumerate() {
            y = (0..layer.width())
                .map(|j| {
                    let v = act.apply(dot(layer.weights.row(j), &y) + layer.biases[j]);
                    match mask {
                        Some(m) if !m.keep[l][j] => 0.0,
                        Some(m) => v * m.scale,
                        None => v,
                    }
                })
                .collect();
        }
        let out: Vec<f64> = (0..net.output_dim()).map(|k| dot(net.output_weights.row(k), &y)).collect();
        total.add(example_loss(&out, batch.labels[i]));
    }
    Ok(total.value() / batch.len() as f64)
}

/// Central finite-difference estimate of every parameter gradient.
pub fn numerical_gradients(
    net: &Network,
    batch: &LabeledDataset,
    mask: Option<&DropoutMask>,
    h: f64,
) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(net);
    let mut probe = net.clone();
    let central = |probe: &mut Network, get: &dyn Fn(&mut Network) -> &mut f64| -> Result<f64> {
        let orig = *get(probe);
        *get(probe) = orig + h;
        let up = masked_loss(probe, batch, mask)?;
        *get(probe) = orig - h;
        let down = masked_loss(probe, batch, mask)?;
        *get(probe) = orig;
        Ok((up - down) / (2.0 * h))
    };
    for l in 0..net.depth() {
        for idx in 0..net.layers[l].weights.as_slice().len() {
            grads.weights[l].as_mut_slice()[idx] =
                central(&mut probe, &|n: &mut Network| &mut n.layers[l].weights.as_mut_slice()[idx])?;
        }
        for j in 0..net.layers[l].width() {
            grads.biases[l][j] = central(&mut probe, &|n: &mut Network| &mut n.layers[l].biases[j])?;
        }
    }
    for idx in 0..net.output_weights.as_slice().len() {
        grads.output_weights.as_mut_slice()[idx] =
            central(&mut probe, &|n: &mut Network| &mut n.output_weights.as_mut_slice()[idx])?;
    }
    Ok(grads)
}

impl Gradients {
    /// All entries in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend_from_slice(w.as_slice());
            v.extend_from_slice(b);
        }
        v.extend_from_slice(self.output_weights.as_slice());
        v
    }

    /// Largest `|a - b| / max(|a|, |b|)` over entries, ignoring pairs where
    /// both magnitudes are below `floor`.
    pub fn max_relative_deviation(&self, other: &Gradients, floor: f64) -> f64 {
        self.flatten()
            .iter()
            .zip(other.flatten())
            .filter(|(a, b)| a.abs().max(b.abs()) >= floor)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()))
            .fold(0.0, f64::max)
    }
}

fn apply_update(net: &mut Network, grads: &Gradients, lr: f64) {
    for (layer, (gw, gb)) in net.layers.iter_mut().zip(grads.weights.iter().zip(&grads.biases)) {
        for (w, g) in layer.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *w -= lr * g;
        }
        for (b, g) in layer.biases.iter_mut().zip(gb) {
            *b -= lr * g;
        }
    }
    for (w, g) in net.output_weights.as_mut_slice().iter_mut().zip(grads.output_weights.as_slice()) {
        *w -= lr * g;
    }
}

fn clear(grads: &mut Gradients) {
    for m in &mut grads.weights {
        m.as_mut_slice().iter_mut().for_each(|g| *g = 0.0);
    }
    for b in &mut grads.biases {
        b.iter_mut().for_each(|g| *g = 0.0);
    }
    grads.output_weights.as_mut_slice().iter_mut().for_each(|g| *g = 0.0);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub trained: Network,
    pub history: Vec<EpochStats>,
    pub epochs_used: usize,
}

/// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
pub fn init_network(spec: &TopologySpec, seed: u64) -> Result<Network> {
    let mut rng = SeededRng::new(seed);
    spec.build(|fan_in| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        rng.uniform_range(-bound, bound)
    })
}

pub fn train(net: &Network, data: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.check()?;
    net.check()?;
    data.check_for(net)?;
    let mut net = net.clone();
    let mut rng = SeededRng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = Gradients::zeros_like(&net);
    let mut work = Workspace::new(&net);
    let widths = net.widths();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut epochs_used = 0;
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let mask = (cfg.dropout_rate > 0.0).then(|| DropoutMask::sample(&widths, cfg.dropout_rate, &mut rng));
            clear(&mut grads);
            accumulate(&net, data, batch, mask.as_ref(), &mut grads, &mut work);
            apply_update(&mut net, &grads, cfg.learning_rate);
        }
        epochs_used = epoch;
        let l = loss(&net, data)?;
        if !l.is_finite() {
            return Err(Error::Diverged { epoch, loss: l });
        }
        history.push(EpochStats { epoch, loss: l, accuracy: accuracy(&net, data)? });
        if cfg.target_loss.is_some_and(|t| l <= t) {
            break;
        }
    }
    Ok(TrainOutcome { trained: net, history, epochs_used })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCostRow {
    pub lipschitz: f64,
    pub mean_epochs: f64,
    pub std_epochs: f64,
    /// Runs that hit the epoch cap before reaching the target loss.
    pub censored: usize,
    pub runs: usize,
}

/// For each coefficient `K`, trains one fresh network per entry of
/// `run_seeds` and summarizes the epochs needed to reach `cfg.target_loss`.
/// Runs that never reach it count as the epoch cap.
pub fn learning_cost_sweep(
    spec: &TopologySpec,
    data: &LabeledDataset,
    k_grid: &[f64],
    run_seeds: &[u64],
    cfg: &TrainConfig,
) -> Result<Vec<LearningCostRow>> {
    if run_seeds.len() < 2 {
        return Err(Error::Domain("learning-cost sweep needs at least two runs per K".into()));
    }
    k_grid
        .iter()
        .map(|&k| {
            let activation = Activation::new(spec.activation.kind(), k)?;
            let spec_k = TopologySpec { activation, ..spec.clone() };
            let runs = run_seeds
                .par_iter()
                .map(|&seed| {
                    let init = init_network(&spec_k, seed)?;
                    let out = train(&init, data, &TrainConfig { seed, ..cfg.clone() })?;
                    let reached = cfg.target_loss.is_some_and(|t| out.history.last().is_some_and(|h| h.loss <= t));
                    Ok((out.epochs_used as f64, !reached))
                })
                .collect::<Result<Vec<_>>>()?;
            let n = runs.len() as f64;
            let mean = runs.iter().map(|r| r.0).sum::<f64>() / n;
            let var = runs.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(LearningCostRow {
                lipschitz: k,
                mean_epochs: mean,
                std_epochs: var.sqrt(),
                censored: runs.iter().filter(|r| r.1).count(),
                runs: runs.len(),
            })
        })
        .collect()
}

/// The 4-point XOR task as a 2-class problem.
pub fn xor_dataset() -> LabeledDataset {
    LabeledDataset::new(
        vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
        vec![0, 1, 1, 0],
        2,
    )
    .expect("static dataset")
}
