//! Experiment runners producing result rows.

use std::path::PathBuf;

use num_bigint::BigUint;

use crate::activation::{Activation, ActivationKind};
use crate::combinatorics::binomial;
use crate::dataio::{load_mnist, LayerCrashRow, LearningCostRecord, MnistSplit, ResultRow, RobustnessRow};
use crate::erf::ErfEstimator;
use crate::error::{Error, Result};
use crate::netgen::{random_inputs, random_network, scale_weights, TopologySpec};
use crate::network::Network;
use crate::omega::{
    omega_auto, omega_sampled, required_evaluations, single_crash_mean_by_layer, Norm, OmegaConfig, OmegaReport,
    DEFAULT_BUDGET,
};
use crate::rng::SeededRng;
use crate::trainer::{accuracy, init_network, learning_cost_sweep, train, xor_dataset, TrainConfig};

pub const DEFAULT_K_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_SCALE_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_DROPOUT_GRID: [f64; 4] = [0.0, 0.1, 0.2, 0.3];

/// Topology of generated networks, minus the Lipschitz coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct NetShape {
    pub input_dim: usize,
    pub layer_widths: Vec<usize>,
    pub output_dim: usize,
    pub kind: ActivationKind,
}

impl NetShape {
    pub fn topology(&self, lipschitz: f64) -> Result<TopologySpec> {
        TopologySpec::new(
            self.input_dim,
            self.layer_widths.clone(),
            self.output_dim,
            Activation::new(self.kind, lipschitz)?,
        )
    }
}

impl Default for NetShape {
    /// Four layers of four neurons on four inputs, one output.
    fn default() -> Self {
        Self { input_dim: 4, layer_widths: vec![4; 4], output_dim: 1, kind: ActivationKind::Sigmoid }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistStudy {
    pub data_dir: PathBuf,
    pub hidden_widths: Vec<usize>,
    pub kind: ActivationKind,
    pub lipschitz: f64,
    /// Training examples used (the first `train_examples` of the training split).
    pub train_examples: usize,
    pub train: TrainConfig,
}

impl Default for MnistStudy {
    fn default() -> Self {
        Self {
            data_dir: crate::dataio::mnist_dir(),
            hidden_widths: vec![48],
            kind: ActivationKind::Relu,
            lipschitz: 1.0,
            train_examples: 10_000,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    SweepK { shape: NetShape, k_grid: Vec<f64>, f_list: Vec<usize>, seeds: Vec<u64> },
    SweepScale { shape: NetShape, lipschitz: f64, scale_grid: Vec<f64>, f_list: Vec<usize>, seeds: Vec<u64> },
    DepthInversion { shape: NetShape, k_grid: Vec<f64>, seeds: Vec<u64> },
    DropoutStudy { study: MnistStudy, dropout_grid: Vec<f64>, f_list: Vec<usize> },
    LearningCost { hidden_widths: Vec<usize>, kind: ActivationKind, k_grid: Vec<f64>, run_seeds: Vec<u64>, train: TrainConfig },
    ErfReport { network: Network, f_list: Vec<usize> },
    OmegaReport { network: Network, f_list: Vec<usize> },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SweepK { .. } => "sweep_k",
            Experiment::SweepScale { .. } => "sweep_scale",
            Experiment::DepthInversion { .. } => "depth_inversion",
            Experiment::DropoutStudy { .. } => "dropout_study",
            Experiment::LearningCost { .. } => "learning_cost",
            Experiment::ErfReport { .. } => "erf_report",
            Experiment::OmegaReport { .. } => "omega_report",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    /// Number of evaluation inputs `M`.
    pub inputs: usize,
    pub seed: u64,
    pub budget: u64,
    pub workers: usize,
    pub norm: Norm,
    /// Pattern count for sampling; `None` means exhaustive only.
    pub sample: Option<u64>,
    /// Take evaluation inputs from the MNIST test split in this directory
    /// instead of drawing them uniformly.
    pub mnist_inputs: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            inputs: 200,
            seed: 0,
            budget: DEFAULT_BUDGET,
            workers: 0,
            norm: Norm::Max,
            sample: None,
            mnist_inputs: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Domain("budget must be positive".into()));
        }
        if self.inputs == 0 {
            return Err(Error::Domain("at least one evaluation input is required".into()));
        }
        let empty = match &self.experiment {
            Experiment::SweepK { k_grid, f_list, seeds, .. } => k_grid.is_empty() || f_list.is_empty() || seeds.is_empty(),
            Experiment::SweepScale { scale_grid, f_list, seeds, .. } => {
                scale_grid.is_empty() || f_list.is_empty() || seeds.is_empty()
            }
            Experiment::DepthInversion { k_grid, seeds, .. } => k_grid.is_empty() || seeds.is_empty(),
            Experiment::DropoutStudy { dropout_grid, f_list, .. } => dropout_grid.is_empty() || f_list.is_empty(),
            Experiment::LearningCost { k_grid, run_seeds, .. } => k_grid.is_empty() || run_seeds.is_empty(),
            Experiment::ErfReport { f_list, .. } | Experiment::OmegaReport { f_list, .. } => f_list.is_empty(),
        };
        if empty {
            return Err(Error::Domain(format!("{}: parameter grids must be nonempty", self.experiment.name())));
        }
        Ok(())
    }

    fn omega_config(&self) -> OmegaConfig {
        OmegaConfig { norm: self.norm, workers: self.workers, budget: self.budget }
    }
}

/// Thousands-separated decimal form of a big integer.
pub fn group_digits(n: &BigUint) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Evaluations an omega run would perform: every pattern, or at most
/// `sample` of them, times the input count.
pub fn planned_evaluations(hidden: usize, f_total: usize, inputs: usize, sample: Option<u64>) -> Result<BigUint> {
    match sample {
        Some(n) => Ok(binomial(hidden as u64, f_total as u64)?.min(BigUint::from(n)) * BigUint::from(inputs)),
        None => required_evaluations(hidden, f_total, inputs),
    }
}

/// Refuses before any input is generated when the run cannot fit the budget.
fn ensure_budget(hidden: usize, f_total: usize, spec: &ExperimentSpec) -> Result<()> {
    let budget = BigUint::from(spec.budget);
    let exhaustive = required_evaluations(hidden, f_total, spec.inputs)?;
    if exhaustive <= budget {
        return Ok(());
    }
    match spec.sample {
        Some(n) => {
            let planned = planned_evaluations(hidden, f_total, spec.inputs, Some(n))?;
            if planned > budget {
                return Err(Error::BudgetExceeded { required: planned, budget: spec.budget });
            }
            Ok(())
        }
        None => Err(Error::BudgetExceeded { required: exhaustive, budget: spec.budget }),
    }
}

fn inputs_for(spec: &ExperimentSpec, input_dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    match &spec.mnist_inputs {
        Some(dir) => {
            let test = load_mnist(dir, MnistSplit::Test)?;
            if Some(input_dim) != test.input_dim() {
                return Err(Error::Shape(format!("network expects {input_dim} inputs, MNIST images have 784")));
            }
            Ok(test.take(spec.inputs).inputs().to_vec())
        }
        None => Ok(random_inputs(input_dim, spec.inputs, SeededRng::derive(seed, 1).next_u64())),
    }
}

fn robustness_row(
    experiment: &str,
    seed: u64,
    net: &Network,
    f: usize,
    omega: Option<&OmegaReport>,
    erf: &ErfEstimator,
) -> Result<ResultRow> {
    let total = erf.erf_total(f)?;
    Ok(ResultRow::Robustness(RobustnessRow {
        experiment: experiment.to_string(),
        seed,
        activation: net.activation.kind(),
        lipschitz: net.activation.lipschitz(),
        widths: net.widths(),
        f,
        omega_av: omega.map(|o| o.omega_av),
        omega_mav: omega.map(|o| o.omega_mav),
        omega_max: omega.map(|o| o.omega_max),
        omega_std: omega.map(|o| o.std_dev),
        erf_av: Some(total.erf_av_expected),
        erf_max: Some(total.erf_max_worst),
        patterns: omega.map(|o| o.patterns_evaluated),
        inputs: omega.map(|o| o.inputs_evaluated as usize),
        mode: omega.map_or_else(|| "erf".to_string(), |o| o.mode.to_string()),
    }))
}

/// Ω and Erf for every `f` on one network.
fn analyze(
    experiment: &str,
    seed: u64,
    net: &Network,
    inputs: &[Vec<f64>],
    f_list: &[usize],
    spec: &ExperimentSpec,
) -> Result<Vec<ResultRow>> {
    let erf = ErfEstimator::new(net)?;
    let cfg = spec.omega_config();
    f_list
        .iter()
        .map(|&f| {
            ensure_budget(net.hidden_count(), f, spec)?;
            let omega = omega_auto(net, inputs, f, spec.sample, seed, &cfg)?;
            robustness_row(experiment, seed, net, f, Some(&omega), &erf)
        })
        .collect()
}

/// A network trained on the MNIST subset with its test accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNet {
    pub dropout_rate: f64,
    pub network: Network,
    pub test_accuracy: f64,
}

/// Trains one network per dropout rate, all from the same initialization.
pub fn train_dropout_nets(study: &MnistStudy, dropout_grid: &[f64]) -> Result<Vec<TrainedNet>> {
    let train_set = load_mnist(&study.data_dir, MnistSplit::Train)?.take(study.train_examples);
    let test_set = load_mnist(&study.data_dir, MnistSplit::Test)?;
    let spec = TopologySpec::new(784, study.hidden_widths.clone(), 10, Activation::new(study.kind, study.lipschitz)?)?;
    let init = init_network(&spec, study.train.seed)?;
    dropout_grid
        .iter()
        .map(|&rate| {
            let cfg = TrainConfig { dropout_rate: rate, ..study.train.clone() };
            let network = train(&init, &train_set, &cfg)?.trained;
            let test_accuracy = accuracy(&network, &test_set)?;
            Ok(TrainedNet { dropout_rate: rate, network, test_accuracy })
        })
        .collect()
}

pub fn run(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.check()?;
    let name = spec.experiment.name();
    match &spec.experiment {
        Experiment::SweepK { shape, k_grid, f_list, seeds } => {
            let mut rows = Vec::new();
            for &seed in seeds {
                let inputs = inputs_for(spec, shape.input_dim, seed)?;
                for &k in k_grid {
                    let net = random_network(&shape.topology(k)?, seed)?;
                    rows.extend(analyze(name, seed, &net, &inputs, f_list, spec)?);
                }
            }
            Ok(rows)
        }
        Experiment::SweepScale { shape, lipschitz, scale_grid, f_list, seeds } => {
            let mut rows = Vec::new();
            for &seed in seeds {
                let inputs = inputs_for(spec, shape.input_dim, seed)?;
                let base = random_network(&shape.topology(*lipschitz)?, seed)?;
                for &s in scale_grid {
                    let net = scale_weights(&base, s)?;
                    rows.extend(analyze(&format!("{name}_s{s}"), seed, &net, &inputs, f_list, spec)?);
                }
            }
            Ok(rows)
        }
        Experiment::DepthInversion { shape, k_grid, seeds } => {
            let mut rows = Vec::new();
            for &seed in seeds {
                let inputs = inputs_for(spec, shape.input_dim, seed)?;
                for &k in k_grid {
                    let net = random_network(&shape.topology(k)?, seed)?;
                    ensure_budget(net.hidden_count(), 1, spec)?;
                    let means = single_crash_mean_by_layer(&net, &inputs, spec.norm)?;
                    for (l, m) in means.into_iter().enumerate() {
                        rows.push(ResultRow::LayerCrash(LayerCrashRow {
                            experiment: name.to_string(),
                            seed,
                            activation: net.activation.kind(),
                            lipschitz: k,
                            widths: net.widths(),
                            layer: l + 1,
                            omega_single_mean: m,
                        }));
                    }
                }
            }
            Ok(rows)
        }
        Experiment::DropoutStudy { study, dropout_grid, f_list } => {
            let test = load_mnist(&study.data_dir, MnistSplit::Test)?.take(spec.inputs);
            let n_samples = spec.sample.unwrap_or(10_000);
            let hidden: usize = study.hidden_widths.iter().sum();
            for &f in f_list {
                let planned = planned_evaluations(hidden, f, test.len(), Some(n_samples))?;
                if planned > BigUint::from(spec.budget) {
                    return Err(Error::BudgetExceeded { required: planned, budget: spec.budget });
                }
            }
            let cfg = spec.omega_config();
            let mut rows = Vec::new();
            for t in train_dropout_nets(study, dropout_grid)? {
                let erf = ErfEstimator::new(&t.network)?;
                let label = format!("{name}_p{}", t.dropout_rate);
                for &f in f_list {
                    let omega = omega_sampled(&t.network, test.inputs(), f, n_samples, spec.seed, &cfg)?;
                    rows.push(robustness_row(&label, study.train.seed, &t.network, f, Some(&omega), &erf)?);
                }
            }
            Ok(rows)
        }
        Experiment::LearningCost { hidden_widths, kind, k_grid, run_seeds, train } => {
            let topo = TopologySpec::new(2, hidden_widths.clone(), 2, Activation::new(*kind, 1.0)?)?;
            let table = learning_cost_sweep(&topo, &xor_dataset(), k_grid, run_seeds, train)?;
            Ok(table
                .into_iter()
                .map(|r| {
                    ResultRow::LearningCost(LearningCostRecord {
                        experiment: name.to_string(),
                        lipschitz: r.lipschitz,
                        runs: r.runs,
                        mean_epochs: r.mean_epochs,
                        std_epochs: r.std_epochs,
                        censored: r.censored,
                    })
                })
                .collect())
        }
        Experiment::ErfReport { network, f_list } => {
            let erf = ErfEstimator::new(network)?;
            f_list.iter().map(|&f| robustness_row(name, spec.seed, network, f, None, &erf)).collect()
        }
        Experiment::OmegaReport { network, f_list } => {
            network.check()?;
            for &f in f_list {
                ensure_budget(network.hidden_count(), f, spec)?;
            }
            let inputs = inputs_for(spec, network.input_dim, spec.seed)?;
            analyze(name, spec.seed, network, &inputs, f_list, spec)
        }
    }
}
