//! Input-independent robustness estimators.
//!
//! For a crash allocation `(f_1..f_L)` the propagated output error is bounded by
//!
//! ```text
//! Erf = sum_l C_l f_l K^(L-l) w^(L+1) prod_{l'=l+1..L} (N_l' - f_l') w^(l')
//! ```
//!
//! where `w^(l)` is either the largest (`erf_max`) or the mean (`erf_av`)
//! absolute incoming weight of layer `l`, and `C_l` caps the output magnitude
//! of any layer-`l` neuron over the input box `[0,1]^d`.

use crate::activation::ActivationKind;
use crate::combinatorics::{compositions, hypergeometric_weight};
use crate::error::{Error, Result};
use crate::network::{Network, WeightStats};

/// Per-layer output caps `C_1..C_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds {
    pub caps: Vec<f64>,
}

/// Output caps over `[0,1]^d`.
///
/// Sigmoid caps are 1. ReLU caps come from interval propagation of the input
/// box; every activation interval is widened to contain 0 so the caps stay
/// valid when any subset of neurons is crashed.
pub fn layer_output_bounds(net: &Network) -> Result<LayerBounds> {
    net.check()?;
    let caps = match net.activation.kind() {
        ActivationKind::Sigmoid => vec![1.0; net.depth()],
        ActivationKind::Relu => relu_interval_caps(net),
    };
    Ok(LayerBounds { caps })
}

fn relu_interval_caps(net: &Network) -> Vec<f64> {
    let k = net.activation.lipschitz();
    let mut lo = vec![0.0; net.input_dim];
    let mut hi = vec![1.0; net.input_dim];
    let mut caps = Vec::with_capacity(net.depth());
    for layer in &net.layers {
        let mut next_hi = Vec::with_capacity(layer.width());
        for (j, b) in layer.biases.iter().enumerate() {
            let mut s_hi = 0.0;
            for (i, &w) in layer.weights.row(j).iter().enumerate() {
                s_hi += (w * lo[i]).max(w * hi[i]);
            }
            s_hi += b;
            next_hi.push(k * s_hi.max(0.0));
        }
        caps.push(next_hi.iter().copied().fold(0.0, f64::max));
        lo = vec![0.0; layer.width()];
        hi = next_hi;
    }
    caps
}

/// Contribution of one layer's crashes to each estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerTerm {
    pub max: f64,
    pub av: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErfReport {
    pub f_per_layer: Vec<usize>,
    pub erf_max: f64,
    pub erf_av: f64,
    pub layer_terms: Vec<LayerTerm>,
}

/// Erf over a total crash budget, aggregated across per-layer allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct ErfTotal {
    pub f_total: usize,
    /// Largest `erf_max` over all allocations.
    pub erf_max_worst: f64,
    /// Hypergeometric expectation of `erf_av` under a uniform crashed subset.
    pub erf_av_expected: f64,
    pub worst_allocation: Vec<usize>,
    pub allocations: Vec<AllocationTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTerm {
    pub allocation: Vec<usize>,
    pub weight: f64,
    pub erf_max: f64,
    pub erf_av: f64,
}

/// Caches the caps and weight statistics of one network.
#[derive(Debug, Clone)]
pub struct ErfEstimator {
    widths: Vec<usize>,
    caps: Vec<f64>,
    stats: Vec<WeightStats>,
    lipschitz: f64,
}

impl ErfEstimator {
    pub fn new(net: &Network) -> Result<Self> {
        let bounds = layer_output_bounds(net)?;
        Ok(Self {
            widths: net.widths(),
            caps: bounds.caps,
            stats: net.layer_weight_stats(),
            lipschitz: net.activation.lipschitz(),
        })
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn erf_fixed(&self, f: &[usize]) -> Result<ErfReport> {
        let depth = self.widths.len();
        if f.len() != depth {
            return Err(Error::Pattern(format!(
                "allocation has {} entries, network has {depth} layers",
                f.len()
            )));
        }
        if let Some((l, (&fl, &n))) = f.iter().zip(&self.widths).enumerate().find(|(_, (fl, n))| fl > n) {
            return Err(Error::Pattern(format!("{fl} crashes requested in layer {l} of width {n}")));
        }
        let out = self.stats[depth];
        let mut layer_terms = Vec::with_capacity(depth);
        for l in 0..depth {
            let base = self.caps[l] * f[l] as f64 * self.lipschitz.powi((depth - 1 - l) as i32);
            let mut t_max = base * out.max_abs;
            let mut t_av = base * out.mean_abs;
            for lp in l + 1..depth {
                let survivors = (self.widths[lp] - f[lp]) as f64;
                t_max *= survivors * self.stats[lp].max_abs;
                t_av *= survivors * self.stats[lp].mean_abs;
            }
            layer_terms.push(LayerTerm { max: t_max, av: t_av });
        }
        Ok(ErfReport {
            f_per_layer: f.to_vec(),
            erf_max: layer_terms.iter().map(|t| t.max).sum(),
            erf_av: layer_terms.iter().map(|t| t.av).sum(),
            layer_terms,
        })
    }

    pub fn erf_total(&self, f_total: usize) -> Result<ErfTotal> {
        let hidden: usize = self.widths.iter().sum();
        if f_total > hidden {
            return Err(Error::Pattern(format!(
                "{f_total} crashes requested, network has {hidden} hidden neurons"
            )));
        }
        let mut allocations = Vec::new();
        let mut erf_max_worst = f64::NEG_INFINITY;
        let mut worst_allocation = Vec::new();
        let mut expected = 0.0;
        for alloc in compositions(&self.widths, f_total) {
            let weight = hypergeometric_weight(&self.widths, &alloc)?;
            let r = self.erf_fixed(&alloc)?;
            if r.erf_max > erf_max_worst {
                erf_max_worst = r.erf_max;
                worst_allocation = alloc.clone();
            }
            expected += weight * r.erf_av;
            allocations.push(AllocationTerm { allocation: alloc, weight, erf_max: r.erf_max, erf_av: r.erf_av });
        }
        Ok(ErfTotal {
            f_total,
            erf_max_worst,
            erf_av_expected: expected,
            worst_allocation,
            allocations,
        })
    }
}

/// Erf for a fixed per-layer allocation `f`.
pub fn erf_fixed(net: &Network, f: &[usize]) -> Result<ErfReport> {
    ErfEstimator::new(net)?.erf_fixed(f)
}

/// Erf for `f_total` crashes spread over all hidden layers.
pub fn erf_total(net: &Network, f_total: usize) -> Result<ErfTotal> {
    ErfEstimator::new(net)?.erf_total(f_total)
}

/// Target accuracy `epsilon` and achieved accuracy `epsilon_prime`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessQuery {
    epsilon: f64,
    epsilon_prime: f64,
}

impl RobustnessQuery {
    pub fn new(epsilon: f64, epsilon_prime: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon_prime.is_finite() && 0.0 <= epsilon_prime && epsilon_prime <= epsilon) {
            return Err(Error::Domain(format!(
                "need 0 <= epsilon' <= epsilon, got epsilon={epsilon}, epsilon'={epsilon_prime}"
            )));
        }
        Ok(Self { epsilon, epsilon_prime })
    }

    pub fn margin(&self) -> f64 {
        self.epsilon - self.epsilon_prime
    }
}

/// Number of random crashes a single-hidden-layer network absorbs on average
/// within the margin `epsilon - epsilon'`: `min(N_1, floor(margin / (C w_av)))`.
pub fn tolerable_crashes_single_layer(net: &Network, q: &RobustnessQuery) -> Result<usize> {
    if net.depth() != 1 {
        return Err(Error::Unsupported(format!(
            "closed-form tolerance needs a single hidden layer, network has {}; use erf_total",
            net.depth()
        )));
    }
    let width = net.layers[0].width();
    let cap = layer_output_bounds(net)?.caps[0];
    let w_av = net.layer_weight_stats()[1].mean_abs;
    let cost = cap * w_av;
    let margin = q.margin();
    if cost == 0.0 {
        return Ok(if margin == 0.0 { 0 } else { width });
    }
    let ratio = margin / cost;
    if ratio >= width as f64 {
        return Ok(width);
    }
    let mut n = ratio.floor() as usize;
    // Admit n + 1 when it fits the margin up to rounding of the division,
    // e.g. 0.3 / 0.1 = 2.9999999999999996.
    if n < width && (n + 1) as f64 * cost <= margin * (1.0 + 4.0 * f64::EPSILON) {
        n += 1;
    }
    Ok(n.min(width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::network::{DenseLayer, Matrix};

    fn net(widths: &[usize], input_dim: usize, act: Activation) -> Network {
        let mut prev = input_dim;
        let layers = widths
            .iter()
            .map(|&w| {
                let l = DenseLayer::new(Matrix::zeros(w, prev), vec![0.0; w]);
                prev = w;
                l
            })
            .collect();
        Network::new(input_dim, layers, Matrix::zeros(1, prev), act).unwrap()
    }

    #[test]
    fn sigmoid_caps_are_one() {
        let n = net(&[3, 5, 2], 4, Activation::sigmoid(2.0).unwrap());
        assert_eq!(layer_output_bounds(&n).unwrap().caps, vec![1.0; 3]);
    }

    #[test]
    fn relu_caps_by_hand() {
        for (k, cap) in [(1.0, 2.0), (3.0, 6.0)] {
            let mut n = net(&[1], 1, Activation::relu(k).unwrap());
            n.layers[0].weights = Matrix::new(1, 1, vec![2.0]).unwrap();
            assert_eq!(layer_output_bounds(&n).unwrap().caps, vec![cap]);
        }
    }

    #[test]
    fn relu_caps_with_negative_weights_and_bias() {
        // s = 2 x1 - 3 x2 + 0.5 over [0,1]^2 -> [-2.5, 2.5]; y in [0, 2.5].
        // Layer 2: s = -1 * y + 4 -> [1.5, 4], cap 4.
        let mut n = net(&[1, 1], 2, Activation::relu(1.0).unwrap());
        n.layers[0] = DenseLayer::new(Matrix::new(1, 2, vec![2.0, -3.0]).unwrap(), vec![0.5]);
        n.layers[1] = DenseLayer::new(Matrix::new(1, 1, vec![-1.0]).unwrap(), vec![4.0]);
        assert_eq!(layer_output_bounds(&n).unwrap().caps, vec![2.5, 4.0]);
    }

    #[test]
    fn zero_allocation_is_zero() {
        let n = net(&[2, 3], 2, Activation::relu(1.5).unwrap());
        let r = erf_fixed(&n, &[0, 0]).unwrap();
        assert_eq!((r.erf_max, r.erf_av), (0.0, 0.0));
    }

    #[test]
    fn two_layer_hand_value() {
        // w_max^(2) = 0.5, w_max^(3) = 2, f = (1, 0) -> 1 * 1 * 1 * 2 * (2 * 0.5) = 2.
        let mut n = net(&[2, 2], 1, Activation::sigmoid(1.0).unwrap());
        n.layers[1].weights = Matrix::new(2, 2, vec![0.5, -0.5, 0.25, 0.0]).unwrap();
        n.output_weights = Matrix::new(1, 2, vec![2.0, -1.0]).unwrap();
        let r = erf_fixed(&n, &[1, 0]).unwrap();
        assert_eq!(r.erf_max, 2.0);
        // Mean mode: 1 * 1 * 1.5 * (2 * 0.3125) = 0.9375.
        assert_eq!(r.erf_av, 0.9375);
        assert_eq!(r.layer_terms[1], LayerTerm { max: 0.0, av: 0.0 });
    }

    #[test]
    fn single_layer_hand_value() {
        let mut n = net(&[3], 1, Activation::sigmoid(1.0).unwrap());
        n.output_weights = Matrix::new(1, 3, vec![0.7, -0.3, 0.5]).unwrap();
        let r = erf_fixed(&n, &[2]).unwrap();
        assert!((r.erf_max - 1.4).abs() < 1e-15);
        assert!((r.erf_av - 1.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_allocation_rejected() {
        let n = net(&[2, 2], 1, Activation::sigmoid(1.0).unwrap());
        assert!(matches!(erf_fixed(&n, &[3, 0]), Err(Error::Pattern(_))));
        assert!(matches!(erf_fixed(&n, &[1]), Err(Error::Pattern(_))));
        assert!(matches!(erf_total(&n, 5), Err(Error::Pattern(_))));
    }

    #[test]
    fn total_over_two_compositions() {
        let mut n = net(&[2, 2], 1, Activation::sigmoid(1.0).unwrap());
        n.layers[1].weights = Matrix::new(2, 2, vec![0.75, -0.5, 0.25, 0.0]).unwrap();
        n.output_weights = Matrix::new(1, 2, vec![2.0, -1.0]).unwrap();
        let t = erf_total(&n, 1).unwrap();
        let a = erf_fixed(&n, &[1, 0]).unwrap();
        let b = erf_fixed(&n, &[0, 1]).unwrap();
        assert_eq!(t.allocations.len(), 2);
        assert_eq!(t.erf_av_expected, 0.5 * b.erf_av + 0.5 * a.erf_av);
        assert_eq!(t.erf_max_worst, a.erf_max.max(b.erf_max));
        assert_eq!(t.worst_allocation, vec![1, 0]);

        let z = erf_total(&n, 0).unwrap();
        assert_eq!((z.erf_max_worst, z.erf_av_expected), (0.0, 0.0));
    }

    #[test]
    fn total_single_layer_is_fixed() {
        let mut n = net(&[4], 2, Activation::sigmoid(1.0).unwrap());
        n.output_weights = Matrix::new(1, 4, vec![0.1, -0.4, 0.3, 2.0]).unwrap();
        let t = erf_total(&n, 3).unwrap();
        let r = erf_fixed(&n, &[3]).unwrap();
        assert_eq!(t.allocations.len(), 1);
        assert_eq!(t.erf_av_expected, r.erf_av);
        assert_eq!(t.erf_max_worst, r.erf_max);
    }

    #[test]
    fn tolerable_crashes_cases() {
        let mut n = net(&[5], 1, Activation::sigmoid(1.0).unwrap());
        n.output_weights = Matrix::filled(1, 5, 0.1);
        let q = |e, ep| RobustnessQuery::new(e, ep).unwrap();
        assert_eq!(tolerable_crashes_single_layer(&n, &q(0.4, 0.4)).unwrap(), 0);
        assert_eq!(tolerable_crashes_single_layer(&n, &q(0.3, 0.0)).unwrap(), 3);
        assert_eq!(tolerable_crashes_single_layer(&n, &q(0.35, 0.05)).unwrap(), 3);
        assert_eq!(tolerable_crashes_single_layer(&n, &q(0.29, 0.0)).unwrap(), 2);
        assert_eq!(tolerable_crashes_single_layer(&n, &q(10.0, 0.0)).unwrap(), 5);

        n.output_weights = Matrix::zeros(1, 5);
        assert_eq!(tolerable_crashes_single_layer(&n, &q(1.0, 0.0)).unwrap(), 5);
        assert_eq!(tolerable_crashes_single_layer(&n, &q(0.0, 0.0)).unwrap(), 0);

        let deep = net(&[2, 2], 1, Activation::sigmoid(1.0).unwrap());
        assert!(matches!(
            tolerable_crashes_single_layer(&deep, &q(1.0, 0.0)),
            Err(Error::Unsupported(_))
        ));
        assert!(RobustnessQuery::new(0.1, 0.2).is_err());
        assert!(RobustnessQuery::new(0.1, -0.1).is_err());
    }
}
