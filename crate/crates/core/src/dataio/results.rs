use std::io::Write;
use std::path::Path;

use crate::activation::ActivationKind;
use crate::error::{Error, Result};

pub const ROBUSTNESS_HEADER: [&str; 16] = [
    "experiment", "seed", "activation", "K", "L", "widths", "f", "omega_av", "omega_mav", "omega_max", "omega_std",
    "erf_av", "erf_max", "patterns", "inputs", "mode",
];
const LAYER_CRASH_HEADER: [&str; 8] = ["experiment", "seed", "activation", "K", "L", "widths", "layer", "omega_single_mean"];
const LEARNING_COST_HEADER: [&str; 6] = ["experiment", "K", "runs", "mean_epochs", "std_epochs", "censored"];
const EPOCH_HEADER: [&str; 5] = ["experiment", "seed", "epoch", "loss", "accuracy"];

/// One Ω/Erf measurement. Omega fields are `None` for Erf-only reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub experiment: String,
    pub seed: u64,
    pub activation: ActivationKind,
    pub lipschitz: f64,
    pub widths: Vec<usize>,
    pub f: usize,
    pub omega_av: Option<f64>,
    pub omega_mav: Option<f64>,
    pub omega_max: Option<f64>,
    pub omega_std: Option<f64>,
    pub erf_av: Option<f64>,
    pub erf_max: Option<f64>,
    pub patterns: Option<u64>,
    pub inputs: Option<usize>,
    pub mode: String,
}

/// Mean single-crash Ω for one layer (1-based in the output).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCrashRow {
    pub experiment: String,
    pub seed: u64,
    pub activation: ActivationKind,
    pub lipschitz: f64,
    pub widths: Vec<usize>,
    pub layer: usize,
    pub omega_single_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCostRecord {
    pub experiment: String,
    pub lipschitz: f64,
    pub runs: usize,
    pub mean_epochs: f64,
    pub std_epochs: f64,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub experiment: String,
    pub seed: u64,
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResultRow {
    Robustness(RobustnessRow),
    LayerCrash(LayerCrashRow),
    LearningCost(LearningCostRecord),
    Epoch(EpochRow),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Robustness,
    LayerCrash,
    LearningCost,
    Epoch,
}

impl Schema {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            Schema::Robustness => &ROBUSTNESS_HEADER,
            Schema::LayerCrash => &LAYER_CRASH_HEADER,
            Schema::LearningCost => &LEARNING_COST_HEADER,
            Schema::Epoch => &EPOCH_HEADER,
        }
    }
}

/// Shortest text that parses back to the same bits.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

pub fn parse_float(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Document(format!("not a number: {s:?}")))
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn widths_field(widths: &[usize]) -> String {
    widths.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

impl ResultRow {
    pub fn schema(&self) -> Schema {
        match self {
            ResultRow::Robustness(_) => Schema::Robustness,
            ResultRow::LayerCrash(_) => Schema::LayerCrash,
            ResultRow::LearningCost(_) => Schema::LearningCost,
            ResultRow::Epoch(_) => Schema::Epoch,
        }
    }

    pub fn fields(&self) -> Vec<String> {
        match self {
            ResultRow::Robustness(r) => vec![
                r.experiment.clone(),
                r.seed.to_string(),
                r.activation.name().to_string(),
                format_float(r.lipschitz),
                r.widths.len().to_string(),
                widths_field(&r.widths),
                r.f.to_string(),
                opt(r.omega_av, format_float),
                opt(r.omega_mav, format_float),
                opt(r.omega_max, format_float),
                opt(r.omega_std, format_float),
                opt(r.erf_av, format_float),
                opt(r.erf_max, format_float),
                opt(r.patterns, |p| p.to_string()),
                opt(r.inputs, |m| m.to_string()),
                r.mode.clone(),
            ],
            ResultRow::LayerCrash(r) => vec![
                r.experiment.clone(),
                r.seed.to_string(),
                r.activation.name().to_string(),
                format_float(r.lipschitz),
                r.widths.len().to_string(),
                widths_field(&r.widths),
                r.layer.to_string(),
                format_float(r.omega_single_mean),
            ],
            ResultRow::LearningCost(r) => vec![
                r.experiment.clone(),
                format_float(r.lipschitz),
                r.runs.to_string(),
                format_float(r.mean_epochs),
                format_float(r.std_epochs),
                r.censored.to_string(),
            ],
            ResultRow::Epoch(r) => vec![
                r.experiment.clone(),
                r.seed.to_string(),
                r.epoch.to_string(),
                format_float(r.loss),
                format_float(r.accuracy),
            ],
        }
    }
}

/// Writes a header and the rows in order. All rows must share one schema;
/// an empty slice produces the robustness header alone.
pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let schema = rows.first().map_or(Schema::Robustness, ResultRow::schema);
    if let Some(bad) = rows.iter().find(|r| r.schema() != schema) {
        return Err(Error::MixedSchemas(format!("{schema:?} rows mixed with {:?}", bad.schema())));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema.header())?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn results_to_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_results(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn write_results_file(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    write_results(std::fs::File::create(path)?, rows)
}
