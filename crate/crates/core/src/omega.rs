//! Empirical crash-induced output error.
//!
//! For one input `X` and one crash pattern, `Ω(X) = ‖F_neu(X) - F_fail(X)‖`
//! (max or mean over output components). Aggregates over every crash subset of
//! exactly `f` hidden neurons (or a seeded sample of them) and a set of inputs:
//!
//! - `omega_av`: mean over pattern x input;
//! - `omega_mav`: mean over inputs of the max over patterns;
//! - `omega_max`: max over pattern x input.
//!
//! Patterns are processed in fixed-size chunks of consecutive lexicographic
//! ranks. Chunk partials (compensated sums, maxima) are merged in chunk order,
//! so reports are bit-identical for any worker count.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::combinatorics::{binomial, Combinations};
use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::network::{layer_offsets, CrashPattern, Network, Scratch};
use crate::rng::SeededRng;

/// Default cap on pattern x input evaluations.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

const CHUNK_PATTERNS: u64 = 128;
const CHUNKS_PER_BATCH: u64 = 64;

/// Aggregation of per-component output deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    Max,
    Mean,
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Norm::Max),
            "mean" => Ok(Norm::Mean),
            other => Err(Error::Domain(format!("unknown norm {other:?} (expected max or mean)"))),
        }
    }
}

impl Norm {
    #[inline]
    fn deviation(self, nominal: &[f64], failed: &[f64]) -> f64 {
        match self {
            Norm::Max => nominal.iter().zip(failed).fold(0.0, |m, (a, b)| m.max((a - b).abs())),
            Norm::Mean => {
                let mut s = 0.0;
                for (a, b) in nominal.iter().zip(failed) {
                    s += (a - b).abs();
                }
                s / nominal.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaMode {
    Exhaustive,
    Sampled { seed: u64, n_samples: u64 },
}

impl std::fmt::Display for OmegaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OmegaMode::Exhaustive => f.write_str("exhaustive"),
            OmegaMode::Sampled { .. } => f.write_str("sampled"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaReport {
    pub f_total: usize,
    pub omega_av: f64,
    pub omega_mav: f64,
    pub omega_max: f64,
    /// Population standard deviation over all pattern x input values.
    pub std_dev: f64,
    /// `std_dev / sqrt(n_samples * inputs)` when sampled, else 0.
    pub std_err: f64,
    pub patterns_evaluated: u64,
    pub inputs_evaluated: u64,
    pub mode: OmegaMode,
}

impl OmegaReport {
    /// Number of crash-degraded forward evaluations behind this report.
    pub fn evaluations(&self) -> u64 {
        self.patterns_evaluated * self.inputs_evaluated
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OmegaConfig {
    pub norm: Norm,
    /// Worker threads; 0 means the rayon default.
    pub workers: usize,
    pub budget: u64,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        Self { norm: Norm::Max, workers: 0, budget: DEFAULT_BUDGET }
    }
}

impl OmegaConfig {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }
}

/// `Ω(X)` for one input and one pattern.
pub fn omega_point(net: &Network, input: &[f64], pattern: &CrashPattern, norm: Norm) -> Result<f64> {
    let nominal = net.forward(input)?.output;
    let failed = net.forward_failed(input, pattern)?;
    Ok(norm.deviation(&nominal, &failed))
}

/// Exact count `C(hidden, f_total) * inputs` of evaluations an exhaustive run needs.
pub fn required_evaluations(hidden: usize, f_total: usize, inputs: usize) -> Result<BigUint> {
    Ok(binomial(hidden as u64, f_total as u64)? * BigUint::from(inputs))
}

/// Nominal activations and outputs, computed once per input.
struct Nominal {
    activations: Vec<Vec<Vec<f64>>>,
    outputs: Vec<Vec<f64>>,
}

fn prepare(net: &Network, inputs: &[Vec<f64>], f_total: usize) -> Result<Nominal> {
    net.check()?;
    if inputs.is_empty() {
        return Err(Error::Domain("at least one input is required".into()));
    }
    for x in inputs {
        net.check_input(x)?;
    }
    let hidden = net.hidden_count();
    if f_total > hidden {
        return Err(Error::Pattern(format!(
            "{f_total} crashes requested, network has {hidden} hidden neurons"
        )));
    }
    let traces: Vec<_> = inputs.iter().map(|x| net.trace(x, None)).collect();
    Ok(Nominal {
        outputs: traces.iter().map(|t| t.output.clone()).collect(),
        activations: traces.into_iter().map(|t| t.activations).collect(),
    })
}

#[derive(Debug, Clone)]
struct Partial {
    sum: KahanSum,
    sum_sq: KahanSum,
    max: f64,
    per_input_max: Vec<f64>,
    patterns: u64,
}

impl Partial {
    fn new(inputs: usize) -> Self {
        Self { sum: KahanSum::new(), sum_sq: KahanSum::new(), max: 0.0, per_input_max: vec![0.0; inputs], patterns: 0 }
    }

    fn merge(&mut self, other: &Partial) {
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.max = self.max.max(other.max);
        for (a, b) in self.per_input_max.iter_mut().zip(&other.per_input_max) {
            *a = a.max(*b);
        }
        self.patterns += other.patterns;
    }
}

/// Evaluates patterns against all inputs, accumulating into a partial.
struct ChunkEvaluator<'a> {
    net: &'a Network,
    nominal: &'a Nominal,
    offsets: Vec<usize>,
    norm: Norm,
}

impl ChunkEvaluator<'_> {
    fn new<'a>(net: &'a Network, nominal: &'a Nominal, norm: Norm) -> ChunkEvaluator<'a> {
        ChunkEvaluator { net, nominal, offsets: layer_offsets(&net.widths()), norm }
    }

    fn split(&self, flat: &[usize], per_layer: &mut [Vec<usize>]) {
        for c in per_layer.iter_mut() {
            c.clear();
        }
        for &k in flat {
            let l = self.offsets.partition_point(|&o| o <= k) - 1;
            per_layer[l].push(k - self.offsets[l]);
        }
    }

    fn run(&self, patterns: impl FnOnce(&mut dyn FnMut(&[usize]))) -> Partial {
        let m = self.nominal.outputs.len();
        let mut acc = Partial::new(m);
        let mut per_layer = vec![Vec::new(); self.net.depth()];
        let mut scratch = Scratch::default();
        let mut failed = vec![0.0; self.net.output_dim()];
        patterns(&mut |flat: &[usize]| {
            self.split(flat, &mut per_layer);
            for x in 0..m {
                self.net.failed_output_from(&self.nominal.activations[x], &per_layer, &mut scratch, &mut failed);
                let omega = self.norm.deviation(&self.nominal.outputs[x], &failed);
                acc.sum.add(omega);
                acc.sum_sq.add(omega * omega);
                acc.max = acc.max.max(omega);
                let slot = &mut acc.per_input_max[x];
                *slot = slot.max(omega);
            }
            acc.patterns += 1;
        });
        acc
    }
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Processes `n_chunks` chunks in batches, merging partials in chunk order.
fn reduce_chunks(
    n_chunks: u64,
    inputs: usize,
    workers: usize,
    chunk: impl Fn(u64) -> Partial + Sync,
) -> Result<Partial> {
    with_pool(workers, || {
        let mut total = Partial::new(inputs);
        let mut start = 0;
        while start < n_chunks {
            let end = (start + CHUNKS_PER_BATCH).min(n_chunks);
            let parts: Vec<Partial> = (start..end).into_par_iter().map(&chunk).collect();
            for p in &parts {
                total.merge(p);
            }
            start = end;
        }
        total
    })
}

fn finish(p: Partial, f_total: usize, inputs: usize, mode: OmegaMode) -> OmegaReport {
    let n = (p.patterns * inputs as u64) as f64;
    let omega_av = p.sum.value() / n;
    let var = (p.sum_sq.value() / n - omega_av * omega_av).max(0.0);
    let std_dev = var.sqrt();
    let omega_mav = KahanSum::sum_iter(p.per_input_max.iter().copied()) / inputs as f64;
    let std_err = match mode {
        OmegaMode::Exhaustive => 0.0,
        OmegaMode::Sampled { .. } => std_dev / n.sqrt(),
    };
    OmegaReport {
        f_total,
        omega_av,
        omega_mav,
        omega_max: p.max,
        std_dev,
        std_err,
        patterns_evaluated: p.patterns,
        inputs_evaluated: inputs as u64,
        mode,
    }
}

/// Ω aggregates over every crash subset of exactly `f_total` hidden neurons.
///
/// Refuses with [`Error::BudgetExceeded`] when `C(N, f_total) * inputs`
/// exceeds `cfg.budget`.
pub fn omega_exhaustive(net: &Network, inputs: &[Vec<f64>], f_total: usize, cfg: &OmegaConfig) -> Result<OmegaReport> {
    let hidden = net.hidden_count();
    if f_total > hidden {
        return Err(Error::Pattern(format!(
            "{f_total} crashes requested, network has {hidden} hidden neurons"
        )));
    }
    let required = required_evaluations(hidden, f_total, inputs.len())?;
    if required > BigUint::from(cfg.budget) {
        return Err(Error::BudgetExceeded { required, budget: cfg.budget });
    }
    let nominal = prepare(net, inputs, f_total)?;
    let total_patterns = binomial(hidden as u64, f_total as u64)?
        .to_u64()
        .expect("bounded by budget");
    let eval = ChunkEvaluator::new(net, &nominal, cfg.norm);
    let n_chunks = total_patterns.div_ceil(CHUNK_PATTERNS);
    let partial = reduce_chunks(n_chunks, inputs.len(), cfg.workers, |c| {
        let start = c * CHUNK_PATTERNS;
        let len = CHUNK_PATTERNS.min(total_patterns - start);
        eval.run(|visit| Combinations::starting_at(hidden, f_total, start).for_each_n(len, visit))
    })?;
    debug_assert_eq!(partial.patterns, total_patterns);
    Ok(finish(partial, f_total, inputs.len(), OmegaMode::Exhaustive))
}

/// Ω aggregates over `n_samples` seeded uniform crash subsets of size
/// `f_total` (each drawn by partial Fisher–Yates). Falls back to
/// [`omega_exhaustive`] when `n_samples >= C(N, f_total)`.
pub fn omega_sampled(
    net: &Network,
    inputs: &[Vec<f64>],
    f_total: usize,
    n_samples: u64,
    seed: u64,
    cfg: &OmegaConfig,
) -> Result<OmegaReport> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be at least 1".into()));
    }
    let hidden = net.hidden_count();
    if f_total > hidden {
        return Err(Error::Pattern(format!(
            "{f_total} crashes requested, network has {hidden} hidden neurons"
        )));
    }
    if BigUint::from(n_samples) >= binomial(hidden as u64, f_total as u64)? {
        return omega_exhaustive(net, inputs, f_total, cfg);
    }
    let required = BigUint::from(n_samples) * BigUint::from(inputs.len());
    if required > BigUint::from(cfg.budget) {
        return Err(Error::BudgetExceeded { required, budget: cfg.budget });
    }
    let nominal = prepare(net, inputs, f_total)?;
    let mut rng = SeededRng::new(seed);
    let patterns: Vec<Vec<usize>> = (0..n_samples).map(|_| rng.sample_subset(hidden, f_total)).collect();
    let eval = ChunkEvaluator::new(net, &nominal, cfg.norm);
    let n_chunks = n_samples.div_ceil(CHUNK_PATTERNS);
    let partial = reduce_chunks(n_chunks, inputs.len(), cfg.workers, |c| {
        let start = (c * CHUNK_PATTERNS) as usize;
        let end = (start + CHUNK_PATTERNS as usize).min(patterns.len());
        eval.run(|visit| patterns[start..end].iter().for_each(|p| visit(p)))
    })?;
    Ok(finish(partial, f_total, inputs.len(), OmegaMode::Sampled { seed, n_samples }))
}

/// Exhaustive when affordable, otherwise sampled with `n_samples` patterns.
pub fn omega_auto(
    net: &Network,
    inputs: &[Vec<f64>],
    f_total: usize,
    n_samples: Option<u64>,
    seed: u64,
    cfg: &OmegaConfig,
) -> Result<OmegaReport> {
    match (omega_exhaustive(net, inputs, f_total, cfg), n_samples) {
        (Err(Error::BudgetExceeded { .. }), Some(n)) => omega_sampled(net, inputs, f_total, n, seed, cfg),
        (result, _) => result,
    }
}

/// Closed-form expected mean deviation of a single-layer, scalar-output
/// network with nonnegative output weights:
/// `(f / N_1) * sum_i w_i * mean_X y_i(X)`.
pub fn single_layer_expected_exact(net: &Network, f_total: usize, inputs: &[Vec<f64>]) -> Result<f64> {
    net.check()?;
    if net.depth() != 1 || net.output_dim() != 1 {
        return Err(Error::Unsupported(
            "closed form needs one hidden layer and a scalar output".into(),
        ));
    }
    let weights = net.output_weights.row(0);
    if let Some(i) = weights.iter().position(|&w| w < 0.0) {
        return Err(Error::Unsupported(format!(
            "closed form needs nonnegative output weights; weight {i} is {}",
            weights[i]
        )));
    }
    let width = net.layers[0].width();
    if f_total > width {
        return Err(Error::Pattern(format!("{f_total} crashes requested in a layer of width {width}")));
    }
    if inputs.is_empty() {
        return Err(Error::Domain("at least one input is required".into()));
    }
    let mut means = vec![KahanSum::new(); width];
    for x in inputs {
        net.check_input(x)?;
        let t = net.trace(x, None);
        for (m, &y) in means.iter_mut().zip(&t.activations[0]) {
            m.add(y);
        }
    }
    let m = inputs.len() as f64;
    let weighted = KahanSum::sum_iter(weights.iter().zip(&means).map(|(w, s)| w * (s.value() / m)));
    Ok(f_total as f64 / width as f64 * weighted)
}

/// Mean Ω over all single crashes located in each hidden layer, per layer.
pub fn single_crash_mean_by_layer(net: &Network, inputs: &[Vec<f64>], norm: Norm) -> Result<Vec<f64>> {
    let nominal = prepare(net, inputs, 1)?;
    let eval = ChunkEvaluator::new(net, &nominal, norm);
    let offsets = layer_offsets(&net.widths());
    Ok((0..net.depth())
        .map(|l| {
            let p = eval.run(|visit| (offsets[l]..offsets[l + 1]).for_each(|k| visit(&[k])));
            p.sum.value() / (p.patterns as f64 * inputs.len() as f64)
        })
        .collect())
}
