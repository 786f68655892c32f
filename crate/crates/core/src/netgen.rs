//! Seeded random networks and weight scaling.

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::network::{DenseLayer, Matrix, Network};
use crate::rng::SeededRng;

/// Mean and standard deviation of randomly generated synaptic weights.
pub const WEIGHT_MEAN: f64 = 1.0;
pub const WEIGHT_STD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub input_dim: usize,
    pub layer_widths: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl TopologySpec {
    pub fn new(input_dim: usize, layer_widths: Vec<usize>, output_dim: usize, activation: Activation) -> Result<Self> {
        let spec = Self { input_dim, layer_widths, output_dim, activation };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.layer_widths.is_empty() || self.layer_widths.contains(&0) {
            return Err(Error::Domain(format!(
                "topology needs positive dimensions and at least one layer: d={}, widths={:?}, out={}",
                self.input_dim, self.layer_widths, self.output_dim
            )));
        }
        Ok(())
    }

    /// Builds a zero-bias network whose weights come from `draw`, in layer
    /// order, row-major within each matrix, output weights last.
    pub(crate) fn build(&self, mut draw: impl FnMut(usize) -> f64) -> Result<Network> {
        self.check()?;
        let mut prev = self.input_dim;
        let mut layers = Vec::with_capacity(self.layer_widths.len());
        for &w in &self.layer_widths {
            let data = (0..w * prev).map(|_| draw(prev)).collect();
            layers.push(DenseLayer::new(Matrix::new(w, prev, data)?, vec![0.0; w]));
            prev = w;
        }
        let out = (0..self.output_dim * prev).map(|_| draw(prev)).collect();
        Network::new(self.input_dim, layers, Matrix::new(self.output_dim, prev, out)?, self.activation)
    }
}

/// Every synaptic weight (hidden and output) i.i.d. Normal(1, 5); biases 0.
pub fn random_network(spec: &TopologySpec, seed: u64) -> Result<Network> {
    let mut rng = SeededRng::new(seed);
    spec.build(|_| rng.normal(WEIGHT_MEAN, WEIGHT_STD))
}

/// Copy with every weight (hidden and output) multiplied by `s`; biases kept.
pub fn scale_weights(net: &Network, s: f64) -> Result<Network> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("scale factor must be finite, got {s}")));
    }
    let mut out = net.clone();
    for layer in &mut out.layers {
        layer.weights = layer.weights.map(|w| w * s);
    }
    out.output_weights = out.output_weights.map(|w| w * s);
    Ok(out)
}

/// `m` seeded points drawn uniformly from `[0,1]^d`.
pub fn random_inputs(input_dim: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SeededRng::new(seed);
    (0..m).map(|_| (0..input_dim).map(|_| rng.uniform()).collect()).collect()
}
