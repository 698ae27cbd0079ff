//! Experiment orchestration: synthetic instance generation, solver
//! comparisons on held-out test realizations, parameter sweeps with derived
//! seeds, CSV emission, and a composite verification suite.

pub mod verify;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{pareto_from_mean, Instance, Item, ValueDistribution};
use crate::rng::{Purpose, Seed};
use crate::scores::estimate_scores;
use crate::solvers::{celf, tsg};
use crate::value_fn::ValueFunction;

/// Test realizations used to evaluate final solver outputs.
pub const TEST_EVAL_REPS: usize = 50_000;

/// Default joint realizations for the in-solver candidate comparison.
pub const DEFAULT_EVAL_REPS: usize = 10_000;

/// Item value distribution family for synthetic instances. `Deterministic`
/// is a degenerate family kept for noise-free pipeline tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistFamily {
    Bernoulli,
    Exponential,
    Pareto { shape: f64 },
    Deterministic,
}

impl fmt::Display for DistFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistFamily::Bernoulli => write!(f, "bernoulli"),
            DistFamily::Exponential => write!(f, "exponential"),
            DistFamily::Pareto { shape } => write!(f, "pareto:{shape}"),
            DistFamily::Deterministic => write!(f, "deterministic"),
        }
    }
}

impl FromStr for DistFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<DistFamily> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["bernoulli"] => Ok(DistFamily::Bernoulli),
            ["exponential"] => Ok(DistFamily::Exponential),
            ["pareto", shape] => {
                let shape: f64 = shape
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad pareto shape in {s}")))?;
                if shape <= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "pareto shape {shape} must exceed 1"
                    )));
                }
                Ok(DistFamily::Pareto { shape })
            }
            ["deterministic"] => Ok(DistFamily::Deterministic),
            _ => Err(Error::InvalidParameter(format!("unknown distribution family {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Cost grows with the item's own mean: c = 1 + lambda * mean.
    Correlated,
    /// Cost uses a fresh uniform draw instead of the item's mean.
    Independent,
}

impl fmt::Display for CostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostMode::Correlated => write!(f, "correlated"),
            CostMode::Independent => write!(f, "independent"),
        }
    }
}

impl FromStr for CostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<CostMode> {
        match s {
            "correlated" => Ok(CostMode::Correlated),
            "independent" => Ok(CostMode::Independent),
            _ => Err(Error::InvalidParameter(format!("unknown cost mode {s}"))),
        }
    }
}

/// Configuration of one synthetic comparison setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub budget: f64,
    pub value_fn: ValueFunction,
    pub dist: DistFamily,
    /// Cost coefficient in c = 1 + lambda * mean.
    pub lambda: f64,
    /// Training samples per item for score estimation and benchmark
    /// evaluations.
    pub train_samples: usize,
    /// Instances generated for this setting.
    pub instances: usize,
    pub seed: u64,
    pub cost_mode: CostMode,
}

impl SyntheticConfig {
    pub fn new(value_fn: ValueFunction, dist: DistFamily) -> SyntheticConfig {
        SyntheticConfig {
            n: 100,
            budget: 30.0,
            value_fn,
            dist,
            lambda: 0.0,
            train_samples: 150,
            instances: 20,
            seed: 0,
            cost_mode: CostMode::Correlated,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidParameter("need at least one item".into()));
        }
        if !self.budget.is_finite() || self.budget <= 0.0 {
            return Err(Error::InvalidParameter(format!("budget {} must be positive", self.budget)));
        }
        if self.train_samples < 1 {
            return Err(Error::InvalidParameter("need at least one training sample".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda {} must be nonnegative",
                self.lambda
            )));
        }
        self.value_fn.validate()
    }
}

/// Generate the synthetic instance with the given index: item means are
/// uniform on (0, 1), the distribution family is matched to each mean, and
/// costs follow 1 + lambda * mean (or an independent fresh mean). Identical
/// (seed, index) pairs always produce the identical instance.
pub fn generate_synthetic(cfg: &SyntheticConfig, index: u64) -> Result<Instance> {
    cfg.validate()?;
    let mut rng = Seed(cfg.seed).stream(Purpose::Generation, &[index]);
    let mut items = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mean = rng.uniform_open();
        let dist = match cfg.dist {
            DistFamily::Bernoulli => ValueDistribution::Bernoulli { mean },
            DistFamily::Exponential => ValueDistribution::Exponential { mean },
            DistFamily::Pareto { shape } => pareto_from_mean(mean, shape)?,
            DistFamily::Deterministic => ValueDistribution::Deterministic { value: mean },
        };
        let cost_mean = match cfg.cost_mode {
            CostMode::Correlated => mean,
            CostMode::Independent => rng.uniform_open(),
        };
        let cost = 1.0 + cfg.lambda * cost_mean;
        items.push(Item::new(i as u64 + 1, cost, dist)?);
    }
    Ok(Instance::new(items, cfg.budget)?.with_seed(Seed(cfg.seed).derive(index).0))
}

/// Evaluate a selected set on held-out test realizations. Streams are
/// addressed per item, so two sets evaluated under the same seed share the
/// draws of their common items (common random numbers).
pub fn evaluate_on_test(
    instance: &Instance,
    g: &ValueFunction,
    ids: &[u64],
    reps: usize,
    seed: Seed,
) -> Result<f64> {
    if ids.is_empty() {
        return Ok(g.eval(&[]));
    }
    let draws: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| {
            let item = instance.item(id)?;
            let mut rng = seed.stream(Purpose::TestEval, &[id]);
            Ok(item.dist.sample_values(reps, &mut rng))
        })
        .collect::<Result<_>>()?;
    let mut buf = vec![0.0; ids.len()];
    let mut total = 0.0;
    for rep in 0..reps {
        for (j, col) in draws.iter().enumerate() {
            buf[j] = col[rep];
        }
        total += g.eval(&buf);
    }
    Ok(total / reps as f64)
}

/// One solver comparison on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub instance_index: u64,
    pub n: usize,
    pub budget: f64,
    pub value_fn: String,
    pub dist: String,
    pub lambda: f64,
    pub train_samples: usize,
    pub seed: u64,
    pub tsg_value: f64,
    pub celf_value: f64,
    /// tsg_value / celf_value; NaN when the benchmark value is nonpositive.
    pub ratio: f64,
    pub tsg_set_size: usize,
    pub celf_set_size: usize,
    pub tsg_millis: u64,
    pub celf_millis: u64,
}

pub fn comparison_csv_header() -> &'static str {
    "instance_index,n,budget,value_fn,dist,lambda,train_samples,seed,tsg_value,celf_value,ratio,tsg_set_size,celf_set_size,tsg_millis,celf_millis"
}

impl ComparisonRow {
    /// CSV row; `zero_times` replaces wall-clock columns with zeros so
    /// reruns under the same seed are byte-identical.
    pub fn to_csv(&self, zero_times: bool) -> String {
        let (t_ms, c_ms) = if zero_times { (0, 0) } else { (self.tsg_millis, self.celf_millis) };
        format!(
            "{},{},{:?},{},{},{:?},{},{},{:?},{:?},{:?},{},{},{},{}",
            self.instance_index,
            self.n,
            self.budget,
            self.value_fn,
            self.dist,
            self.lambda,
            self.train_samples,
            self.seed,
            self.tsg_value,
            self.celf_value,
            self.ratio,
            self.tsg_set_size,
            self.celf_set_size,
            t_ms,
            c_ms
        )
    }
}

/// Run the score greedy against the lazy value-oracle benchmark on
/// `cfg.instances` fresh instances. Scores are estimated from
/// `cfg.train_samples` draws per item, the benchmark estimates marginals
/// from the same number of realizations, and both outputs are evaluated on a
/// common held-out stream of [`TEST_EVAL_REPS`] realizations.
pub fn run_comparison(cfg: &SyntheticConfig) -> Result<Vec<ComparisonRow>> {
    cfg.validate()?;
    (0..cfg.instances as u64)
        .into_par_iter()
        .map(|index| {
            let instance = generate_synthetic(cfg, index)?;
            let sub = Seed(cfg.seed).derive(index);
            let scores = estimate_scores(&instance, &cfg.value_fn, cfg.train_samples, sub)?;

            let t0 = Instant::now();
            let tsg_sol = tsg(&instance, &scores, DEFAULT_EVAL_REPS, sub)?;
            let tsg_millis = t0.elapsed().as_millis() as u64;

            let t1 = Instant::now();
            let celf_sol = celf(&instance, &cfg.value_fn, cfg.train_samples, sub)?;
            let celf_millis = t1.elapsed().as_millis() as u64;

            let tsg_value =
                evaluate_on_test(&instance, &cfg.value_fn, &tsg_sol.selected, TEST_EVAL_REPS, sub)?;
            let celf_value =
                evaluate_on_test(&instance, &cfg.value_fn, &celf_sol.selected, TEST_EVAL_REPS, sub)?;
            let ratio = if celf_value > 0.0 { tsg_value / celf_value } else { f64::NAN };
            Ok(ComparisonRow {
                instance_index: index,
                n: cfg.n,
                budget: cfg.budget,
                value_fn: cfg.value_fn.tag(),
                dist: cfg.dist.to_string(),
                lambda: cfg.lambda,
                train_samples: cfg.train_samples,
                seed: cfg.seed,
                tsg_value,
                celf_value,
                ratio,
                tsg_set_size: tsg_sol.selected.len(),
                celf_set_size: celf_sol.selected.len(),
                tsg_millis,
                celf_millis,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    SampleSize,
    Dist,
    ValueFn,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepAxis::Lambda => write!(f, "lambda"),
            SweepAxis::SampleSize => write!(f, "samples"),
            SweepAxis::Dist => write!(f, "dist"),
            SweepAxis::ValueFn => write!(f, "value_fn"),
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<SweepAxis> {
        match s {
            "lambda" => Ok(SweepAxis::Lambda),
            "samples" | "n-samples" => Ok(SweepAxis::SampleSize),
            "dist" => Ok(SweepAxis::Dist),
            "value-fn" | "value_fn" => Ok(SweepAxis::ValueFn),
            _ => Err(Error::InvalidParameter(format!("unknown sweep axis {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub label: String,
    pub rows: Vec<ComparisonRow>,
}

/// Median and quartile summary of one cell's ratio column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summary_csv_header() -> &'static str {
    "cell,count,median_ratio,q1_ratio,q3_ratio,min_ratio,max_ratio"
}

impl SummaryRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:?},{:?},{:?},{:?},{:?}",
            self.label, self.count, self.median, self.q1, self.q3, self.min, self.max
        )
    }
}

/// Interpolation-free quantile (lower empirical quantile).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[pos.min(sorted.len() - 1)]
}

/// Summarize the finite ratios of a set of comparison rows.
pub fn summarize(label: &str, rows: &[ComparisonRow]) -> SummaryRow {
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).filter(|r| r.is_finite()).collect();
    ratios.sort_by(|a, b| a.total_cmp(b));
    SummaryRow {
        label: label.to_string(),
        count: ratios.len(),
        median: quantile(&ratios, 0.5),
        q1: quantile(&ratios, 0.25),
        q3: quantile(&ratios, 0.75),
        min: ratios.first().copied().unwrap_or(f64::NAN),
        max: ratios.last().copied().unwrap_or(f64::NAN),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub summaries: Vec<SummaryRow>,
}

/// Run the comparison over every value of one axis. Each cell gets a seed
/// derived from the base seed and its position, so cells are independent and
/// the whole sweep is reproducible.
pub fn sweep(base: &SyntheticConfig, axis: SweepAxis, values: &[String]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one axis value".into()));
    }
    let mut cells = Vec::with_capacity(values.len());
    let mut summaries = Vec::with_capacity(values.len());
    for (ci, raw) in values.iter().enumerate() {
        let mut cfg = base.clone();
        match axis {
            SweepAxis::Lambda => {
                cfg.lambda = raw
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad lambda {raw}")))?;
            }
            SweepAxis::SampleSize => {
                cfg.train_samples = raw
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad sample size {raw}")))?;
            }
            SweepAxis::Dist => cfg.dist = raw.parse()?,
            SweepAxis::ValueFn => cfg.value_fn = raw.parse()?,
        }
        cfg.seed = Seed(base.seed).derive(0x5EED + ci as u64).0;
        let label = format!("{axis}={raw}");
        let rows = run_comparison(&cfg)?;
        summaries.push(summarize(&label, &rows));
        cells.push(SweepCell { label, rows });
    }
    Ok(SweepResult { cells, summaries })
}
