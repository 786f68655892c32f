//! Crash-fault robustness analysis for feed-forward networks.
//!
//! A network's hidden neurons may crash (emit 0). This crate computes the
//! exact output error caused by crash patterns (`omega`), the closed-form
//! upper bound on that error (`erf`), and the tooling around them: seeded
//! network generation, SGD training with dropout, and file formats.

pub mod activation;
pub mod combinatorics;
pub mod dataio;
pub mod erf;
pub mod error;
pub mod harness;
pub mod kahan;
pub mod netgen;
pub mod network;
pub mod omega;
pub mod rng;
pub mod trainer;

pub use activation::{Activation, ActivationKind};
pub use erf::{erf_fixed, erf_total, tolerable_crashes_single_layer, ErfEstimator, ErfReport, ErfTotal, RobustnessQuery};
pub use error::{Error, Result};
pub use netgen::{random_inputs, random_network, scale_weights, TopologySpec};
pub use network::{CrashPattern, DenseLayer, LayerTrace, Matrix, Network, NeuronId};
pub use omega::{omega_exhaustive, omega_sampled, Norm, OmegaConfig, OmegaMode, OmegaReport};
pub use rng::SeededRng;
pub use trainer::{accuracy, backward, train, LabeledDataset, TrainConfig};
