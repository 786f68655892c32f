//! K-Lipschitz activation functions.
//!
//! Both families are parameterized so that their steepest slope is exactly the
//! Lipschitz coefficient `K`:
//!
//! - sigmoid: `1 / (1 + exp(-4 K x))`, slope `K` at the origin;
//! - ReLU: `K * max(0, x)`, slope `K` on the positive half-line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Relu,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Relu => "relu",
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "relu" => Ok(ActivationKind::Relu),
            other => Err(Error::Domain(format!("unknown activation kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An activation family together with its Lipschitz coefficient `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    kind: ActivationKind,
    lipschitz: f64,
}

impl Activation {
    pub fn new(kind: ActivationKind, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::Domain(format!(
                "Lipschitz coefficient must be finite and positive, got {lipschitz}"
            )));
        }
        Ok(Self { kind, lipschitz })
    }

    pub fn sigmoid(lipschitz: f64) -> Result<Self> {
        Self::new(ActivationKind::Sigmoid, lipschitz)
    }

    pub fn relu(lipschitz: f64) -> Result<Self> {
        Self::new(ActivationKind::Relu, lipschitz)
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Same family with a different coefficient.
    pub fn with_lipschitz(&self, lipschitz: f64) -> Result<Self> {
        Self::new(self.kind, lipschitz)
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-4.0 * self.lipschitz * x).exp()),
            ActivationKind::Relu => {
                if x > 0.0 {
                    self.lipschitz * x
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative at a pre-activation `x`. The ReLU subgradient at 0 is 0.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid => {
                let y = self.apply(x);
                4.0 * self.lipschitz * y * (1.0 - y)
            }
            ActivationKind::Relu => {
                if x > 0.0 {
                    self.lipschitz
                } else {
                    0.0
                }
            }
        }
    }
}

/// Free-function form of [`Activation::apply`].
pub fn activate(a: &Activation, x: f64) -> f64 {
    a.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_centered() {
        for k in [0.1, 0.5, 1.0, 2.0, 7.5] {
            assert_eq!(Activation::sigmoid(k).unwrap().apply(0.0), 0.5);
        }
    }

    #[test]
    fn relu_scales_by_k() {
        let a = Activation::relu(2.0).unwrap();
        assert_eq!(a.apply(3.0), 6.0);
        assert_eq!(a.apply(-3.0), 0.0);
    }

    #[test]
    fn sigmoid_unit_k_at_one() {
        let a = Activation::sigmoid(1.0).unwrap();
        let expected = 1.0 / (1.0 + (-4.0f64).exp());
        assert_eq!(a.apply(1.0), expected);
        assert!((a.apply(1.0) - 0.9820138).abs() < 1e-7);
    }

    #[test]
    fn rejects_nonpositive_coefficient() {
        assert!(Activation::sigmoid(0.0).is_err());
        assert!(Activation::relu(-1.0).is_err());
        assert!(Activation::relu(f64::NAN).is_err());
    }

    #[test]
    fn max_slope_equals_k() {
        // Dense finite-difference scan over [-5, 5].
        for kind in [ActivationKind::Sigmoid, ActivationKind::Relu] {
            for k in [0.25, 1.0, 3.0] {
                let a = Activation::new(kind, k).unwrap();
                let h = 1e-6;
                let mut max_slope: f64 = 0.0;
                let mut x = -5.0;
                while x <= 5.0 {
                    let slope = (a.apply(x + h) - a.apply(x - h)) / (2.0 * h);
                    max_slope = max_slope.max(slope);
                    x += 1e-3;
                }
                assert!((max_slope - k).abs() < 1e-5 * k.max(1.0), "{kind} K={k}: {max_slope}");
            }
        }
    }

    #[test]
    fn ranges() {
        let s = Activation::sigmoid(2.0).unwrap();
        let r = Activation::relu(2.0).unwrap();
        for x in [-20.0, -1.0, 0.0, 0.3, 4.0] {
            let y = s.apply(x);
            assert!(y > 0.0 && y < 1.0);
            assert!(r.apply(x) >= 0.0);
        }
    }
}
