//! Replication test scores: batch-mean estimation, exact computation on
//! finite supports, and the sketch quantities (relative cost, min/max/average
//! scores, factor bounds) that sandwich a set's utility.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::instance::{replication_count, Instance, Item};
use crate::rng::{Purpose, Seed};
use crate::value_fn::ValueFunction;

/// Default cap on exact-enumeration terms.
pub const DEFAULT_ENUM_CAP: u64 = 10_000_000;

/// Per-item score record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub item_id: u64,
    pub cost: f64,
    /// Replication count floor(B / cost).
    pub k: u64,
    /// Number of disjoint batches the estimate averaged over.
    pub m: u64,
    /// Estimated (or exact) replication test score.
    pub r_hat: f64,
    /// Batch-mean standard error; 0 when exact or single-batch.
    pub stderr: f64,
    /// Set when fewer than k samples were available and the batch was
    /// filled by cycling them.
    pub degraded: bool,
}

/// Score table for a whole instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    entries: Vec<ScoreEntry>,
    /// Training samples drawn per item (0 for exact tables).
    pub sample_size: usize,
    /// Tag of the value function the scores refer to.
    pub value_fn: String,
    #[serde(skip)]
    index: HashMap<u64, usize>,
}

impl ScoreTable {
    pub fn new(entries: Vec<ScoreEntry>, sample_size: usize, value_fn: String) -> ScoreTable {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.item_id, i))
            .collect();
        ScoreTable { entries, sample_size, value_fn, index }
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn get(&self, item_id: u64) -> Result<&ScoreEntry> {
        self.index
            .get(&item_id)
            .map(|&i| &self.entries[i])
            .ok_or(Error::UnknownItem(item_id))
    }

    pub fn csv_header() -> &'static str {
        "item_id,cost,k,m,r_hat,degraded"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::csv_header());
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:?},{},{},{:?},{}\n",
                e.item_id, e.cost, e.k, e.m, e.r_hat, e.degraded
            ));
        }
        out
    }
}

/// Estimate every item's replication test score from `n_samples` fresh draws
/// per item: the draws are split into floor(N / k) disjoint batches of size k
/// in draw order and the score is the mean of the group value over batches.
/// When k exceeds N the single batch is filled by cycling the N samples and
/// the entry is flagged degraded.
pub fn estimate_scores(
    instance: &Instance,
    g: &ValueFunction,
    n_samples: usize,
    seed: Seed,
) -> Result<ScoreTable> {
    if n_samples < 1 {
        return Err(Error::InvalidParameter("need at least one training sample".into()));
    }
    g.validate()?;
    let entries: Vec<ScoreEntry> = instance
        .items()
        .par_iter()
        .map(|item| {
            let k = replication_count(item, instance.budget())? as usize;
            let mut rng = seed.stream(Purpose::Estimation, &[item.id]);
            let samples = item.dist.sample_values(n_samples, &mut rng);
            let m = n_samples / k;
            let (r_hat, stderr, m_used, degraded) = if m == 0 {
                let batch: Vec<f64> = (0..k).map(|j| samples[j % n_samples]).collect();
                (g.eval(&batch), 0.0, 1usize, true)
            } else {
                let mut batch_values = Vec::with_capacity(m);
                for j in 0..m {
                    batch_values.push(g.eval(&samples[j * k..(j + 1) * k]));
                }
                let mean = batch_values.iter().sum::<f64>() / m as f64;
                let stderr = if m > 1 {
                    let var = batch_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                        / (m - 1) as f64;
                    (var / m as f64).sqrt()
                } else {
                    0.0
                };
                (mean, stderr, m, false)
            };
            Ok(ScoreEntry {
                item_id: item.id,
                cost: item.cost,
                k: k as u64,
                m: m_used as u64,
                r_hat,
                stderr,
                degraded,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScoreTable::new(entries, n_samples, g.tag()))
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k.min(n));
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Number of size-k multisets over s support atoms: C(k + s - 1, s - 1).
fn multiset_count(k: u64, s: u64) -> u128 {
    let mut out: u128 = 1;
    for i in 0..(s - 1) {
        out = out.saturating_mul((k + i + 1) as u128) / (i + 1) as u128;
    }
    out
}

/// Expectation of g over k i.i.d. draws from a finite-support distribution.
/// Exchangeability lets us enumerate value multisets with multinomial
/// weights instead of the full |support|^k product space.
fn multiset_expectation(
    atoms: &[(f64, f64)],
    k: usize,
    g: &ValueFunction,
    cap: u64,
) -> Result<f64> {
    let needed = multiset_count(k as u64, atoms.len() as u64);
    if needed > cap as u128 {
        return Err(Error::CapacityExceeded { needed, cap });
    }
    let mut buf: Vec<f64> = Vec::with_capacity(k);
    fn recurse(
        atoms: &[(f64, f64)],
        idx: usize,
        remaining: usize,
        weight: f64,
        buf: &mut Vec<f64>,
        g: &ValueFunction,
        acc: &mut f64,
    ) {
        let (value, p) = atoms[idx];
        if idx + 1 == atoms.len() {
            let w = weight * p.powi(remaining as i32);
            let before = buf.len();
            buf.extend(std::iter::repeat_n(value, remaining));
            *acc += w * g.eval(buf);
            buf.truncate(before);
            return;
        }
        for count in 0..=remaining {
            let w = weight * binomial(remaining as u64, count as u64) * p.powi(count as i32);
            let before = buf.len();
            buf.extend(std::iter::repeat_n(value, count));
            recurse(atoms, idx + 1, remaining - count, w, buf, g, acc);
            buf.truncate(before);
        }
    }
    let mut acc = 0.0;
    recurse(atoms, 0, k, 1.0, &mut buf, g, &mut acc);
    Ok(acc)
}

/// Exact replication test score E[g(X^(1), ..., X^(k))] with k = floor(B/c).
/// Closed form k * mean for the modular function; weighted enumeration over
/// the product support otherwise (finite supports only, term count capped).
pub fn exact_score(item: &Item, g: &ValueFunction, budget: f64, cap: u64) -> Result<f64> {
    let k = replication_count(item, budget)?;
    if matches!(g, ValueFunction::Modular) {
        return Ok(k as f64 * item.dist.mean());
    }
    let atoms = item.dist.support_atoms().ok_or(Error::UnboundedSupport)?;
    multiset_expectation(&atoms, k as usize, g, cap)
}

/// Score table holding exact scores for every item.
pub fn exact_score_table(instance: &Instance, g: &ValueFunction, cap: u64) -> Result<ScoreTable> {
    let entries = instance
        .items()
        .iter()
        .map(|item| {
            let k = replication_count(item, instance.budget())?;
            Ok(ScoreEntry {
                item_id: item.id,
                cost: item.cost,
                k,
                m: 1,
                r_hat: exact_score(item, g, instance.budget(), cap)?,
                stderr: 0.0,
                degraded: false,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScoreTable::new(entries, 0, g.tag()))
}

/// Exact utility E[g(X_i : i in S)], one realization per item, by weighted
/// enumeration over the joint finite support. Modular gets the closed form.
pub fn exact_utility(instance: &Instance, g: &ValueFunction, ids: &[u64], cap: u64) -> Result<f64> {
    if matches!(g, ValueFunction::Modular) {
        let mut total = 0.0;
        for &id in ids {
            total += instance.item(id)?.dist.mean();
        }
        return Ok(total);
    }
    let mut supports = Vec::with_capacity(ids.len());
    let mut needed: u128 = 1;
    for &id in ids {
        let atoms = instance
            .item(id)?
            .dist
            .support_atoms()
            .ok_or(Error::UnboundedSupport)?;
        needed = needed.saturating_mul(atoms.len() as u128);
        supports.push(atoms);
    }
    if needed > cap as u128 {
        return Err(Error::CapacityExceeded { needed, cap });
    }
    fn recurse(
        supports: &[Vec<(f64, f64)>],
        idx: usize,
        weight: f64,
        buf: &mut Vec<f64>,
        g: &ValueFunction,
        acc: &mut f64,
    ) {
        if idx == supports.len() {
            *acc += weight * g.eval(buf);
            return;
        }
        for &(value, p) in &supports[idx] {
            buf.push(value);
            recurse(supports, idx + 1, weight * p, buf, g, acc);
            buf.pop();
        }
    }
    let mut acc = 0.0;
    let mut buf = Vec::with_capacity(ids.len());
    recurse(&supports, 0, 1.0, &mut buf, g, &mut acc);
    Ok(acc)
}

/// Relative cost d(S) = sum over S of 1/k_i; 0 for the empty set. Roughly
/// the fraction of budget the set consumes, and at most 1.7 for feasible
/// sets.
pub fn relative_cost(instance: &Instance, ids: &[u64]) -> Result<f64> {
    let mut d = 0.0;
    for &id in ids {
        d += 1.0 / instance.replication_count(id)? as f64;
    }
    Ok(d)
}

/// Sketch quantities for a set: relative cost, score extremes and average,
/// and the lower/upper factor bounds tied to the relative cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchReport {
    pub set: Vec<u64>,
    pub d: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub v_avg: f64,
    /// Lower factor 1 - e^{-d}.
    pub p_factor: f64,
    /// Upper factor 1 + d + 2 sqrt(d).
    pub q_factor: f64,
}

/// Build the sketch report for a nonempty set from a score table (exact or
/// estimated, per the caller).
pub fn score_sketch(instance: &Instance, table: &ScoreTable, ids: &[u64]) -> Result<SketchReport> {
    if ids.is_empty() {
        return Err(Error::Domain("sketch of the empty set is undefined".into()));
    }
    let mut d = 0.0;
    let mut v_min = f64::INFINITY;
    let mut v_max = f64::NEG_INFINITY;
    let mut weighted = 0.0;
    for &id in ids {
        instance.item(id)?;
        let entry = table.get(id)?;
        let inv_k = 1.0 / entry.k as f64;
        d += inv_k;
        weighted += entry.r_hat * inv_k;
        v_min = v_min.min(entry.r_hat);
        v_max = v_max.max(entry.r_hat);
    }
    Ok(SketchReport {
        set: ids.to_vec(),
        d,
        v_min,
        v_max,
        v_avg: weighted / d,
        p_factor: -(-d).exp_m1(),
        q_factor: 1.0 + d + 2.0 * d.sqrt(),
    })
}

/// Curvature-parametrized sketch factors: lower (1 - e^{-alpha d}) / alpha
/// (limit d as alpha -> 0) and upper d / (1 - alpha), infinite at alpha = 1.
pub fn curvature_sketch_factors(d: f64, alpha: f64) -> Result<(f64, f64)> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::InvalidParameter(format!("relative cost {d} must be nonnegative")));
    }
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("curvature {alpha} not in [0, 1]")));
    }
    let p = if alpha < 1e-12 {
        d
    } else {
        -(-alpha * d).exp_m1() / alpha
    };
    let q = if alpha >= 1.0 {
        f64::INFINITY
    } else {
        d / (1.0 - alpha)
    };
    Ok((p, q))
}

/// Outcome of checking the sketch sandwich
/// p(d) * v_min <= u(S) <= q(d) * v_max on one set by Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub u_hat: f64,
    pub stderr: f64,
    pub lower: f64,
    pub upper: f64,
    pub d: f64,
    pub pass: bool,
}

/// Verify the sketch sandwich on a feasible set. The utility is estimated
/// with `mc_reps` joint realizations; the bounds use exact scores where the
/// support allows it and high-N estimates otherwise. The inequality is exact
/// in expectation, so only sampling noise can violate it: the check allows a
/// 3-standard-error margin on each side.
pub fn verify_sandwich(
    instance: &Instance,
    g: &ValueFunction,
    ids: &[u64],
    mc_reps: usize,
    seed: Seed,
) -> Result<SandwichReport> {
    if ids.is_empty() {
        return Err(Error::Domain("sandwich of the empty set is undefined".into()));
    }
    if mc_reps < 2 {
        return Err(Error::InvalidParameter("need at least two Monte Carlo reps".into()));
    }
    let total_cost = instance.total_cost(ids)?;
    // Tolerate summation-order noise from callers that checked feasibility
    // with a different accumulation order.
    if total_cost > instance.budget() * (1.0 + 1e-9) {
        return Err(Error::Domain(format!(
            "set cost {total_cost} exceeds budget {}",
            instance.budget()
        )));
    }

    // Per-item scores: exact where the support is finite, estimated from a
    // dedicated high-N stream otherwise.
    let mut d = 0.0;
    let mut v_min = f64::INFINITY;
    let mut v_max = f64::NEG_INFINITY;
    for &id in ids {
        let item = instance.item(id)?;
        let k = replication_count(item, instance.budget())?;
        let r = match exact_score(item, g, instance.budget(), DEFAULT_ENUM_CAP) {
            Ok(r) => r,
            Err(Error::UnboundedSupport) | Err(Error::CapacityExceeded { .. }) => {
                let n = (50_000 * k as usize).min(2_000_000);
                let mut rng = seed.stream(Purpose::Sandwich, &[1, id]);
                let samples = item.dist.sample_values(n, &mut rng);
                let m = n / k as usize;
                let mut sum = 0.0;
                for j in 0..m {
                    sum += g.eval(&samples[j * k as usize..(j + 1) * k as usize]);
                }
                sum / m as f64
            }
            Err(e) => return Err(e),
        };
        d += 1.0 / k as f64;
        v_min = v_min.min(r);
        v_max = v_max.max(r);
    }

    // Monte Carlo utility with one stream per item.
    let draws: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| {
            let item = instance.item(id).expect("validated above");
            let mut rng = seed.stream(Purpose::Sandwich, &[0, id]);
            item.dist.sample_values(mc_reps, &mut rng)
        })
        .collect();
    let mut buf = vec![0.0; ids.len()];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for rep in 0..mc_reps {
        for (j, col) in draws.iter().enumerate() {
            buf[j] = col[rep];
        }
        let v = g.eval(&buf);
        let delta = v - mean;
        mean += delta / (rep + 1) as f64;
        m2 += delta * (v - mean);
    }
    let u_hat = mean;
    let var = m2 / (mc_reps - 1) as f64;
    let stderr = (var.max(0.0) / mc_reps as f64).sqrt();

    let p = -(-d).exp_m1();
    let q = 1.0 + d + 2.0 * d.sqrt();
    let lower = p * v_min;
    let upper = q * v_max;
    let pass = lower - 3.0 * stderr <= u_hat && u_hat <= upper + 3.0 * stderr;
    Ok(SandwichReport { u_hat, stderr, lower, upper, d, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Instance, Item, ValueDistribution};
    use crate::value_fn::SuccessFn;

    fn det(v: f64) -> ValueDistribution {
        ValueDistribution::Deterministic { value: v }
    }

    fn bern(mean: f64) -> ValueDistribution {
        ValueDistribution::Bernoulli { mean }
    }

    /// Independent oracle: expectation over the full |support|^k product
    /// space, no multiset shortcut.
    fn product_expectation(atoms: &[(f64, f64)], k: usize, g: &ValueFunction) -> f64 {
        let mut acc = 0.0;
        let mut odometer = vec![0usize; k];
        loop {
            let mut weight = 1.0;
            let values: Vec<f64> = odometer
                .iter()
                .map(|&i| {
                    weight *= atoms[i].1;
                    atoms[i].0
                })
                .collect();
            acc += weight * g.eval(&values);
            let mut pos = 0;
            loop {
                if pos == k {
                    return acc;
                }
                odometer[pos] += 1;
                if odometer[pos] < atoms.len() {
                    break;
                }
                odometer[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn exact_score_matches_product_oracle() {
        let topr = ValueFunction::TopR { count: 1 };
        let ces = ValueFunction::Ces { degree: 2.0 };
        let succ = ValueFunction::SuccessProbability { pfn: SuccessFn::Capped };
        let emp = ValueDistribution::Empirical { samples: vec![0.2, 0.5, 0.5, 1.0] };
        let cases: Vec<(ValueDistribution, u64, &ValueFunction)> = vec![
            (bern(0.5), 3, &topr),
            (bern(0.4), 2, &ces),
            (bern(0.7), 5, &succ),
            (emp.clone(), 4, &topr),
            (emp, 3, &ces),
        ];
        for (dist, k, g) in cases {
            let atoms = dist.support_atoms().unwrap();
            let oracle = product_expectation(&atoms, k as usize, g);
            let item = Item::new(1, 1.0, dist).unwrap();
            let got = exact_score(&item, g, k as f64, DEFAULT_ENUM_CAP).unwrap();
            assert!((got - oracle).abs() < 1e-12, "{got} vs oracle {oracle}");
        }
    }

    #[test]
    fn exact_score_frozen_values() {
        // 8 equiprobable outcomes: best-shot score 1 - (1-p)^3 = 0.875.
        let item = Item::new(1, 10.0, bern(0.5)).unwrap();
        let r = exact_score(&item, &ValueFunction::TopR { count: 1 }, 30.0, DEFAULT_ENUM_CAP)
            .unwrap();
        assert!((r - 0.875).abs() < 1e-12);
        // 4-outcome enumeration: 2 * 0.4 * 0.6 * 1 + 0.16 * sqrt(2).
        let item = Item::new(1, 15.0, bern(0.4)).unwrap();
        let r = exact_score(&item, &ValueFunction::Ces { degree: 2.0 }, 30.0, DEFAULT_ENUM_CAP)
            .unwrap();
        let expected = 2.0 * 0.4 * 0.6 + 0.16 * 2.0_f64.sqrt();
        assert!((r - expected).abs() < 1e-12);
        assert!((expected - 0.70627).abs() < 1e-5);
        // Modular closed form holds for unbounded support.
        let item = Item::new(1, 5.0, ValueDistribution::Exponential { mean: 0.3 }).unwrap();
        let r = exact_score(&item, &ValueFunction::Modular, 30.0, DEFAULT_ENUM_CAP).unwrap();
        assert!((r - 6.0 * 0.3).abs() < 1e-12);
    }

    #[test]
    fn exact_score_monotone_in_replications() {
        let gs = vec![
            ValueFunction::TopR { count: 1 },
            ValueFunction::Ces { degree: 2.0 },
            ValueFunction::Power { exponent: 0.5 },
            ValueFunction::SuccessProbability { pfn: SuccessFn::ExpSaturating },
        ];
        for g in gs {
            let mut prev = 0.0;
            for k in 1..=8 {
                let item = Item::new(1, 1.0, bern(0.3)).unwrap();
                let r = exact_score(&item, &g, k as f64, DEFAULT_ENUM_CAP).unwrap();
                assert!(r >= prev - 1e-12, "{g} not monotone at k={k}");
                prev = r;
            }
        }
    }

    #[test]
    fn exact_score_honors_cap() {
        let samples: Vec<f64> = (0..50).map(|i| i as f64 / 50.0).collect();
        let item = Item::new(1, 1.0, ValueDistribution::Empirical { samples }).unwrap();
        let err = exact_score(&item, &ValueFunction::TopR { count: 1 }, 40.0, 1000);
        assert!(matches!(err, Err(Error::CapacityExceeded { .. })));
        let err = exact_score(
            &Item::new(1, 1.0, ValueDistribution::Exponential { mean: 1.0 }).unwrap(),
            &ValueFunction::TopR { count: 1 },
            5.0,
            1000,
        );
        assert!(matches!(err, Err(Error::UnboundedSupport)));
    }

    #[test]
    fn estimated_scores_deterministic_cases() {
        // k = 10 copies of a deterministic 0.5 under the modular function.
        let inst = Instance::new(vec![Item::new(1, 3.0, det(0.5)).unwrap()], 30.0).unwrap();
        let t = estimate_scores(&inst, &ValueFunction::Modular, 50, Seed(1)).unwrap();
        assert_eq!(t.get(1).unwrap().r_hat, 5.0);
        assert_eq!(t.get(1).unwrap().k, 10);
        assert_eq!(t.get(1).unwrap().m, 5);
        assert!(!t.get(1).unwrap().degraded);
        // Best-shot of identical values is the value.
        let inst = Instance::new(vec![Item::new(1, 4.0, det(2.25)).unwrap()], 30.0).unwrap();
        let t = estimate_scores(&inst, &ValueFunction::TopR { count: 1 }, 17, Seed(1)).unwrap();
        assert_eq!(t.get(1).unwrap().r_hat, 2.25);
    }

    #[test]
    fn estimated_score_converges_to_exact() {
        let inst = Instance::new(vec![Item::new(1, 10.0, bern(0.5)).unwrap()], 30.0).unwrap();
        let g = ValueFunction::TopR { count: 1 };
        let t = estimate_scores(&inst, &g, 300_000, Seed(99)).unwrap();
        let e = t.get(1).unwrap();
        assert!((e.r_hat - 0.875).abs() < 0.01, "estimate {}", e.r_hat);
        // Also within 4 standard errors of the exact value.
        assert!((e.r_hat - 0.875).abs() <= 4.0 * e.stderr);
    }

    #[test]
    fn estimator_error_within_four_standard_errors() {
        let g = ValueFunction::Ces { degree: 2.0 };
        for (i, k_cost) in [(2u64, 15.0), (3u64, 10.0)].iter().enumerate() {
            let item = Item::new(7, k_cost.1, bern(0.6)).unwrap();
            let inst = Instance::new(vec![item.clone()], 30.0).unwrap();
            let exact = exact_score(&item, &g, 30.0, DEFAULT_ENUM_CAP).unwrap();
            let n = 100_000 * k_cost.0 as usize;
            let t = estimate_scores(&inst, &g, n, Seed(1000 + i as u64)).unwrap();
            let e = t.get(7).unwrap();
            assert!(
                (e.r_hat - exact).abs() <= 4.0 * e.stderr,
                "k={} err {} stderr {}",
                k_cost.0,
                (e.r_hat - exact).abs(),
                e.stderr
            );
        }
    }

    #[test]
    fn degraded_estimation_cycles_samples() {
        let inst = Instance::new(vec![Item::new(1, 1.0, det(1.0)).unwrap()], 30.0).unwrap();
        let t = estimate_scores(&inst, &ValueFunction::Modular, 4, Seed(1)).unwrap();
        let e = t.get(1).unwrap();
        assert!(e.degraded);
        assert_eq!(e.m, 1);
        assert_eq!(e.k, 30);
        assert_eq!(e.r_hat, 30.0);
    }

    #[test]
    fn relative_cost_examples() {
        let items: Vec<Item> = (1..=10).map(|i| Item::new(i, 3.0, det(1.0)).unwrap()).collect();
        let inst = Instance::new(items, 30.0).unwrap();
        let ids: Vec<u64> = (1..=10).collect();
        assert!((relative_cost(&inst, &ids).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(relative_cost(&inst, &[]).unwrap(), 0.0);
        assert!(matches!(relative_cost(&inst, &[77]), Err(Error::UnknownItem(77))));

        let items = vec![
            Item::new(1, 3.5, det(1.0)).unwrap(),
            Item::new(2, 2.05, det(1.0)).unwrap(),
            Item::new(3, 0.45, det(1.0)).unwrap(),
        ];
        let inst = Instance::new(items, 6.0).unwrap();
        let d = relative_cost(&inst, &[1, 2, 3]).unwrap();
        assert!((d - (1.0 + 0.5 + 1.0 / 13.0)).abs() < 1e-12);
    }

    #[test]
    fn sketch_report_examples() {
        let inst = Instance::new(vec![Item::new(1, 10.0, det(2.0)).unwrap()], 10.0).unwrap();
        let table = exact_score_table(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        let s = score_sketch(&inst, &table, &[1]).unwrap();
        assert_eq!(s.v_min, 2.0);
        assert_eq!(s.v_max, 2.0);
        assert_eq!(s.v_avg, 2.0);
        assert_eq!(s.d, 1.0);
        assert!((s.p_factor - (1.0 - (-1.0_f64).exp())).abs() < 1e-12);
        assert_eq!(s.q_factor, 4.0);

        // Two items with equal k average symmetrically.
        let items = vec![
            Item::new(1, 5.0, det(0.5)).unwrap(),
            Item::new(2, 5.0, det(1.5)).unwrap(),
        ];
        let inst = Instance::new(items, 10.0).unwrap();
        let table = exact_score_table(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        let s = score_sketch(&inst, &table, &[1, 2]).unwrap();
        assert!((s.v_avg - 2.0).abs() < 1e-12);
        assert!((s.d - 1.0).abs() < 1e-12);

        assert!(score_sketch(&inst, &table, &[]).is_err());
    }

    #[test]
    fn q_factor_at_worst_relative_cost() {
        // Costs giving k = (1, 2, 5) under B = 10, so d = 1.7 exactly.
        let items = vec![
            Item::new(1, 6.0, det(1.0)).unwrap(),
            Item::new(2, 4.0, det(1.0)).unwrap(),
            Item::new(3, 2.0, det(1.0)).unwrap(),
        ];
        let inst = Instance::new(items, 10.0).unwrap();
        let table = exact_score_table(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        let s = score_sketch(&inst, &table, &[1, 2, 3]).unwrap();
        assert!((s.d - 1.7).abs() < 1e-12);
        assert!((s.q_factor - 5.307).abs() < 1e-3);
    }

    #[test]
    fn curvature_factor_examples() {
        let (p, q) = curvature_sketch_factors(1.0, 0.0).unwrap();
        assert_eq!((p, q), (1.0, 1.0));
        let (p, _) = curvature_sketch_factors(1.0, 1.0 - 1e-12).unwrap();
        assert!((p - (1.0 - (-1.0_f64).exp())).abs() < 1e-9);
        let (p, q) = curvature_sketch_factors(2.0, 0.5).unwrap();
        assert!((p - 2.0 * (1.0 - (-1.0_f64).exp())).abs() < 1e-12);
        assert_eq!(q, 4.0);
        let (_, q) = curvature_sketch_factors(1.0, 1.0).unwrap();
        assert!(q.is_infinite());
        assert!(curvature_sketch_factors(1.0, 1.5).is_err());
        assert!(curvature_sketch_factors(-0.1, 0.5).is_err());
    }

    #[test]
    fn modular_utility_equals_relative_cost_times_average_score() {
        let items = vec![
            Item::new(1, 3.0, det(0.4)).unwrap(),
            Item::new(2, 7.0, det(1.1)).unwrap(),
            Item::new(3, 11.0, det(0.2)).unwrap(),
        ];
        let inst = Instance::new(items, 22.0).unwrap();
        let table = exact_score_table(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        let ids = [1, 2, 3];
        let s = score_sketch(&inst, &table, &ids).unwrap();
        let u = exact_utility(&inst, &ValueFunction::Modular, &ids, DEFAULT_ENUM_CAP).unwrap();
        assert!((s.d * s.v_avg - u).abs() < 1e-12);
    }

    #[test]
    fn sandwich_deterministic_modular() {
        let items = vec![
            Item::new(1, 4.0, det(0.8)).unwrap(),
            Item::new(2, 6.0, det(0.5)).unwrap(),
        ];
        let inst = Instance::new(items, 12.0).unwrap();
        let r = verify_sandwich(&inst, &ValueFunction::Modular, &[1, 2], 100, Seed(7)).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.u_hat - 1.3).abs() < 1e-12);
        assert_eq!(r.stderr, 0.0);
        assert!(r.lower <= r.u_hat && r.u_hat <= r.upper);
    }

    #[test]
    fn sandwich_singleton_upper_bound() {
        let inst = Instance::new(vec![Item::new(5, 9.0, bern(0.35)).unwrap()], 30.0).unwrap();
        let g = ValueFunction::TopR { count: 1 };
        let r = verify_sandwich(&inst, &g, &[5], 20_000, Seed(11)).unwrap();
        assert!(r.pass, "{r:?}");
        // q >= 1 and the singleton score dominates the one-copy utility.
        assert!(r.upper >= r.u_hat - 3.0 * r.stderr);
    }

    #[test]
    fn sandwich_rejects_infeasible_sets() {
        let items = vec![
            Item::new(1, 8.0, det(0.8)).unwrap(),
            Item::new(2, 8.0, det(0.5)).unwrap(),
        ];
        let inst = Instance::new(items, 12.0).unwrap();
        assert!(verify_sandwich(&inst, &ValueFunction::Modular, &[1, 2], 100, Seed(7)).is_err());
    }

    #[test]
    fn exact_utility_matches_hand_enumeration() {
        let items = vec![
            Item::new(1, 1.0, bern(0.5)).unwrap(),
            Item::new(2, 1.0, bern(0.25)).unwrap(),
        ];
        let inst = Instance::new(items, 4.0).unwrap();
        let g = ValueFunction::TopR { count: 1 };
        // E max = P(at least one hit) = 1 - 0.5 * 0.75.
        let u = exact_utility(&inst, &g, &[1, 2], DEFAULT_ENUM_CAP).unwrap();
        assert!((u - (1.0 - 0.5 * 0.75)).abs() < 1e-12);
    }

    #[test]
    fn score_table_csv_round_trip_fields() {
        let inst = Instance::new(vec![Item::new(3, 2.0, bern(0.5)).unwrap()], 10.0).unwrap();
        let t = estimate_scores(&inst, &ValueFunction::Modular, 10, Seed(1)).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("item_id,cost,k,m,r_hat,degraded\n"));
        assert!(csv.lines().nth(1).unwrap().starts_with("3,2.0,5,2,"));
    }
}
