use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use crashnet_core::activation::{Activation, ActivationKind};
use crashnet_core::dataio::{
    load_mnist, load_network_file, mnist_dir, network_to_json, write_results, EpochRow, MnistSplit, ResultRow,
};
use crashnet_core::harness::{
    group_digits, run, Experiment, ExperimentSpec, MnistStudy, NetShape, DEFAULT_DROPOUT_GRID, DEFAULT_K_GRID,
    DEFAULT_SCALE_GRID,
};
use crashnet_core::netgen::{random_network, TopologySpec};
use crashnet_core::omega::{Norm, DEFAULT_BUDGET};
use crashnet_core::trainer::{accuracy, init_network, train, TrainConfig};
use crashnet_core::Error;

#[derive(Parser)]
#[command(name = "crashnet", version, about = "Crash-fault robustness of feed-forward networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Base seed for networks, inputs and sampled patterns.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Sample N crash patterns when exhaustive enumeration exceeds the budget.
    #[arg(long, global = true, value_name = "N")]
    sample: Option<u64>,
    /// Maximum pattern x input evaluations per omega computation.
    #[arg(long, global = true, value_name = "N", default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Number of evaluation inputs M.
    #[arg(long, global = true, value_name = "M", default_value_t = 200)]
    inputs: usize,
    #[arg(long, global = true, value_enum, default_value_t = NormArg::Max)]
    norm: NormArg,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (stdout when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Max,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sigmoid,
    Relu,
}

impl From<Kind> for ActivationKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Sigmoid => ActivationKind::Sigmoid,
            Kind::Relu => ActivationKind::Relu,
        }
    }
}

#[derive(Args, Clone)]
struct ShapeArgs {
    #[arg(long, default_value_t = 4)]
    input_dim: usize,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4,4,4,4")]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    outputs: usize,
    #[arg(long, value_enum, default_value_t = Kind::Sigmoid)]
    activation: Kind,
}

impl ShapeArgs {
    fn shape(&self) -> NetShape {
        NetShape {
            input_dim: self.input_dim,
            layer_widths: self.widths.clone(),
            output_dim: self.outputs,
            kind: self.activation.into(),
        }
    }
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Stop once the training loss reaches this value.
    #[arg(long)]
    target_loss: Option<f64>,
}

impl TrainArgs {
    fn config(&self, seed: u64, dropout_rate: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch,
            dropout_rate,
            seed,
            target_loss: self.target_loss,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random network (weights N(1,5), zero biases) as JSON.
    Generate {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
    },
    /// Erf bounds of a saved network for each crash count.
    ErfReport {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        f: Vec<usize>,
    },
    /// Measured Omega and Erf of a saved network for each crash count.
    OmegaReport {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        f: Vec<usize>,
        /// Evaluate on MNIST test images instead of uniform random inputs.
        #[arg(long)]
        mnist: bool,
    },
    /// Omega and Erf of random networks across Lipschitz coefficients.
    SweepK {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_GRID.to_vec())]
        k_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        f: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
    },
    /// Omega and Erf of random networks with all weights scaled.
    SweepScale {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SCALE_GRID.to_vec())]
        scale_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        f: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
    },
    /// Mean single-crash Omega per layer across Lipschitz coefficients.
    DepthInversion {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_GRID.to_vec())]
        k_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
    },
    /// Train MNIST networks with several dropout rates and compare robustness.
    DropoutStudy {
        #[arg(long, value_delimiter = ',', default_value = "48")]
        widths: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DROPOUT_GRID.to_vec())]
        dropout_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        f: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        train_examples: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Epochs needed to learn XOR across Lipschitz coefficients.
    LearningCost {
        #[arg(long, value_delimiter = ',', default_value = "4")]
        widths: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Kind::Sigmoid)]
        activation: Kind,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_GRID.to_vec())]
        k_grid: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        runs: u64,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train an MNIST network; writes the network JSON to --out and the
    /// per-epoch history CSV to --history.
    Train {
        #[arg(long, value_delimiter = ',', default_value = "48")]
        widths: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Kind::Relu)]
        activation: Kind,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        #[arg(long, default_value_t = 10_000)]
        train_examples: usize,
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn emit_rows(common: &Common, rows: &[ResultRow]) -> Result<()> {
    let Format::Csv = common.format;
    let mut buf = Vec::new();
    write_results(&mut buf, rows)?;
    emit(&common.out, &buf)
}

fn experiment_spec(common: &Common, experiment: Experiment) -> ExperimentSpec {
    ExperimentSpec {
        experiment,
        inputs: common.inputs,
        seed: common.seed,
        budget: common.budget,
        workers: common.workers,
        norm: match common.norm {
            NormArg::Max => Norm::Max,
            NormArg::Mean => Norm::Mean,
        },
        sample: common.sample,
        mnist_inputs: None,
    }
}

fn execute(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let experiment = match cli.command {
        Command::Generate { shape, k } => {
            let spec = TopologySpec::new(
                shape.input_dim,
                shape.widths.clone(),
                shape.outputs,
                Activation::new(shape.activation.into(), k)?,
            )?;
            let net = random_network(&spec, common.seed)?;
            return emit(&common.out, (network_to_json(&net)? + "\n").as_bytes());
        }
        Command::Train { widths, activation, k, dropout, train_examples, history, train: t } => {
            let dir = mnist_dir();
            let data = load_mnist(&dir, MnistSplit::Train)
                .with_context(|| format!("loading MNIST training split from {}", dir.display()))?
                .take(train_examples);
            let test = load_mnist(&dir, MnistSplit::Test)?;
            let spec = TopologySpec::new(784, widths, 10, Activation::new(activation.into(), k)?)?;
            let init = init_network(&spec, common.seed)?;
            let outcome = train(&init, &data, &t.config(common.seed, dropout))?;
            eprintln!(
                "trained {} epochs, test accuracy {:.4}",
                outcome.epochs_used,
                accuracy(&outcome.trained, &test)?
            );
            if let Some(path) = history {
                let rows: Vec<ResultRow> = outcome
                    .history
                    .iter()
                    .map(|h| {
                        ResultRow::Epoch(EpochRow {
                            experiment: "train".into(),
                            seed: common.seed,
                            epoch: h.epoch,
                            loss: h.loss,
                            accuracy: h.accuracy,
                        })
                    })
                    .collect();
                crashnet_core::dataio::write_results_file(&path, &rows)?;
            }
            return emit(&common.out, (network_to_json(&outcome.trained)? + "\n").as_bytes());
        }
        Command::ErfReport { network, f } => Experiment::ErfReport {
            network: load_network_file(&network).with_context(|| format!("reading {}", network.display()))?,
            f_list: f,
        },
        Command::OmegaReport { network, f, mnist } => {
            let net = load_network_file(&network).with_context(|| format!("reading {}", network.display()))?;
            let mut spec = experiment_spec(common, Experiment::OmegaReport { network: net, f_list: f });
            if mnist {
                spec.mnist_inputs = Some(mnist_dir());
            }
            return emit_rows(common, &run(&spec)?);
        }
        Command::SweepK { shape, k_grid, f, seeds } => {
            Experiment::SweepK { shape: shape.shape(), k_grid, f_list: f, seeds }
        }
        Command::SweepScale { shape, k, scale_grid, f, seeds } => {
            Experiment::SweepScale { shape: shape.shape(), lipschitz: k, scale_grid, f_list: f, seeds }
        }
        Command::DepthInversion { shape, k_grid, seeds } => {
            Experiment::DepthInversion { shape: shape.shape(), k_grid, seeds }
        }
        Command::DropoutStudy { widths, dropout_grid, f, train_examples, train: t } => Experiment::DropoutStudy {
            study: MnistStudy {
                hidden_widths: widths,
                train_examples,
                train: t.config(common.seed, 0.0),
                ..MnistStudy::default()
            },
            dropout_grid,
            f_list: f,
        },
        Command::LearningCost { widths, activation, k_grid, runs, train: t } => {
            if t.target_loss.is_none() {
                bail!("learning-cost needs --target-loss");
            }
            Experiment::LearningCost {
                hidden_widths: widths,
                kind: activation.into(),
                k_grid,
                run_seeds: (0..runs).map(|r| common.seed + r).collect(),
                train: t.config(common.seed, 0.0),
            }
        }
    };
    emit_rows(common, &run(&experiment_spec(common, experiment))?)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match err.downcast_ref::<Error>() {
                Some(Error::BudgetExceeded { required, budget }) => eprintln!(
                    "refusing to run: {} pattern x input evaluations required ({required}), budget is {budget}; \
                     pass --sample N or raise --budget",
                    group_digits(required)
                ),
                _ => eprintln!("error: {err:#}"),
            }
            ExitCode::FAILURE
        }
    }
}
