//! Items, value distributions, budgets, and instance serialization.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Marginal distribution of a single item's random value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueDistribution {
    /// Value 1 with probability `mean`, else 0.
    Bernoulli { mean: f64 },
    /// Exponential with the given mean (rate 1/mean).
    Exponential { mean: f64 },
    /// Type I Pareto; `shape > 1` keeps the mean finite.
    Pareto { shape: f64, scale: f64 },
    Deterministic { value: f64 },
    /// Uniform draw from a fixed list of observed values.
    Empirical { samples: Vec<f64> },
}

impl ValueDistribution {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            ValueDistribution::Bernoulli { mean } => {
                if !mean.is_finite() || !(0.0..=1.0).contains(mean) {
                    return fail(format!("bernoulli mean {mean} not in [0, 1]"));
                }
            }
            ValueDistribution::Exponential { mean } => {
                if !mean.is_finite() || *mean <= 0.0 {
                    return fail(format!("exponential mean {mean} must be positive"));
                }
            }
            ValueDistribution::Pareto { shape, scale } => {
                if !shape.is_finite() || *shape <= 1.0 {
                    return fail(format!("pareto shape {shape} must exceed 1 for a finite mean"));
                }
                if !scale.is_finite() || *scale <= 0.0 {
                    return fail(format!("pareto scale {scale} must be positive"));
                }
            }
            ValueDistribution::Deterministic { value } => {
                if !value.is_finite() || *value < 0.0 {
                    return fail(format!("deterministic value {value} must be nonnegative"));
                }
            }
            ValueDistribution::Empirical { samples } => {
                if samples.is_empty() {
                    return fail("empirical sample list is empty".into());
                }
                if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return fail("empirical samples must be nonnegative and finite".into());
                }
            }
        }
        Ok(())
    }

    /// Analytic mean for parametric variants, arithmetic mean for `Empirical`.
    pub fn mean(&self) -> f64 {
        match self {
            ValueDistribution::Bernoulli { mean } => *mean,
            ValueDistribution::Exponential { mean } => *mean,
            ValueDistribution::Pareto { shape, scale } => shape * scale / (shape - 1.0),
            ValueDistribution::Deterministic { value } => *value,
            ValueDistribution::Empirical { samples } => {
                samples.iter().sum::<f64>() / samples.len() as f64
            }
        }
    }

    /// One draw. Inverse-CDF transforms keep the draw count per sample fixed,
    /// which the reproducibility contract relies on.
    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            ValueDistribution::Bernoulli { mean } => {
                if rng.uniform() < *mean {
                    1.0
                } else {
                    0.0
                }
            }
            ValueDistribution::Exponential { mean } => {
                // 1 - u in (0, 1], so the log is finite.
                -mean * (1.0 - rng.uniform()).ln()
            }
            ValueDistribution::Pareto { shape, scale } => {
                scale * (1.0 - rng.uniform()).powf(-1.0 / shape)
            }
            ValueDistribution::Deterministic { value } => *value,
            ValueDistribution::Empirical { samples } => {
                if samples.len() == 1 {
                    samples[0]
                } else {
                    samples[rng.index(samples.len())]
                }
            }
        }
    }

    /// `count` i.i.d. draws; deterministic given the stream address.
    pub fn sample_values(&self, count: usize, rng: &mut StreamRng) -> Vec<f64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    /// Support atoms as (value, probability) pairs for finite-support
    /// variants, with duplicate empirical values merged. `None` when the
    /// support is not finite.
    pub fn support_atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            ValueDistribution::Bernoulli { mean } => {
                let mut atoms = Vec::new();
                if *mean < 1.0 {
                    atoms.push((0.0, 1.0 - mean));
                }
                if *mean > 0.0 {
                    atoms.push((1.0, *mean));
                }
                Some(atoms)
            }
            ValueDistribution::Deterministic { value } => Some(vec![(*value, 1.0)]),
            ValueDistribution::Empirical { samples } => {
                let mut sorted = samples.clone();
                sorted.sort_by(|a, b| a.total_cmp(b));
                let p = 1.0 / samples.len() as f64;
                let mut atoms: Vec<(f64, f64)> = Vec::new();
                for v in sorted {
                    match atoms.last_mut() {
                        Some((last, w)) if *last == v => *w += p,
                        _ => atoms.push((v, p)),
                    }
                }
                Some(atoms)
            }
            _ => None,
        }
    }

    /// Essential supremum of the support when finite.
    pub fn support_bound(&self) -> Option<f64> {
        match self {
            ValueDistribution::Bernoulli { .. } => Some(1.0),
            ValueDistribution::Deterministic { value } => Some(*value),
            ValueDistribution::Empirical { samples } => {
                Some(samples.iter().fold(0.0_f64, |a, &b| a.max(b)))
            }
            _ => None,
        }
    }

    /// Support bound after truncating unbounded tails at `quantile`.
    /// Finite-support variants are returned unchanged.
    pub fn truncated_bound(&self, quantile: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&quantile) {
            return Err(Error::InvalidParameter(format!(
                "truncation quantile {quantile} not in [0, 1)"
            )));
        }
        if let Some(b) = self.support_bound() {
            return Ok(b);
        }
        let tail = 1.0 - quantile;
        Ok(match self {
            ValueDistribution::Exponential { mean } => -mean * tail.ln(),
            ValueDistribution::Pareto { shape, scale } => scale * tail.powf(-1.0 / shape),
            _ => unreachable!("finite-support variants handled above"),
        })
    }

    /// Tag used in the plain-text instance format, without parameters.
    pub fn tag(&self) -> &'static str {
        match self {
            ValueDistribution::Bernoulli { .. } => "bernoulli",
            ValueDistribution::Exponential { .. } => "exponential",
            ValueDistribution::Pareto { .. } => "pareto",
            ValueDistribution::Deterministic { .. } => "deterministic",
            ValueDistribution::Empirical { .. } => "empirical",
        }
    }
}

/// Type I Pareto with the given mean: scale is `mean * (shape - 1) / shape`.
pub fn pareto_from_mean(mean: f64, shape: f64) -> Result<ValueDistribution> {
    if !shape.is_finite() || shape <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "pareto shape {shape} must exceed 1"
        )));
    }
    if !mean.is_finite() || mean <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "pareto mean {mean} must be positive"
        )));
    }
    Ok(ValueDistribution::Pareto {
        shape,
        scale: mean * (shape - 1.0) / shape,
    })
}

/// One selectable item: a stable id, a positive cost, a value distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: u64,
    pub cost: f64,
    pub dist: ValueDistribution,
}

impl Item {
    pub fn new(id: u64, cost: f64, dist: ValueDistribution) -> Result<Item> {
        if !cost.is_finite() || cost <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "item {id}: cost {cost} must be positive"
            )));
        }
        dist.validate()?;
        Ok(Item { id, cost, dist })
    }
}

/// Number of copies of an item the budget affords: floor(budget / cost).
/// Costs are constructed, so the comparison against the budget is exact.
pub fn replication_count(item: &Item, budget: f64) -> Result<u64> {
    if item.cost > budget {
        return Err(Error::InfeasibleItem {
            id: item.id,
            cost: item.cost,
            budget,
        });
    }
    Ok((budget / item.cost).floor() as u64)
}

/// The ground set of the selection problem. Immutable after construction;
/// every item is individually affordable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    items: Vec<Item>,
    budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl Instance {
    /// Items with cost above the budget are rejected outright: their
    /// replication count would be zero and no feasible singleton contains
    /// them.
    pub fn new(items: Vec<Item>, budget: f64) -> Result<Instance> {
        if !budget.is_finite() || budget <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "budget {budget} must be positive"
            )));
        }
        let mut seen = HashMap::new();
        for item in &items {
            Item::new(item.id, item.cost, item.dist.clone())?;
            if seen.insert(item.id, ()).is_some() {
                return Err(Error::DuplicateId(item.id));
            }
            if item.cost > budget {
                return Err(Error::InfeasibleItem {
                    id: item.id,
                    cost: item.cost,
                    budget,
                });
            }
        }
        Ok(Instance {
            items,
            budget,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Instance {
        self.seed = Some(seed);
        self
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: u64) -> Result<&Item> {
        self.items
            .iter()
            .find(|it| it.id == id)
            .ok_or(Error::UnknownItem(id))
    }

    pub fn replication_count(&self, id: u64) -> Result<u64> {
        replication_count(self.item(id)?, self.budget)
    }

    pub fn total_cost(&self, ids: &[u64]) -> Result<f64> {
        let mut total = 0.0;
        for &id in ids {
            total += self.item(id)?.cost;
        }
        Ok(total)
    }

    /// Line-oriented plain-text form. Floats print in shortest round-trip
    /// notation, so write-then-parse reproduces the instance bit for bit.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "budget {:?}", self.budget).unwrap();
        if let Some(seed) = self.seed {
            writeln!(out, "seed {seed}").unwrap();
        }
        for item in &self.items {
            write!(out, "item {} {:?} {}", item.id, item.cost, item.dist.tag()).unwrap();
            match &item.dist {
                ValueDistribution::Bernoulli { mean }
                | ValueDistribution::Exponential { mean } => {
                    write!(out, " {mean:?}").unwrap();
                }
                ValueDistribution::Pareto { shape, scale } => {
                    write!(out, " {shape:?} {scale:?}").unwrap();
                }
                ValueDistribution::Deterministic { value } => {
                    write!(out, " {value:?}").unwrap();
                }
                ValueDistribution::Empirical { samples } => {
                    for v in samples {
                        write!(out, " {v:?}").unwrap();
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Instance> {
        let mut budget: Option<f64> = None;
        let mut seed: Option<u64> = None;
        let mut items = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let parse_err = |message: String| Error::Parse { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            match fields.next().unwrap() {
                "budget" => {
                    let v = fields
                        .next()
                        .ok_or_else(|| parse_err("budget needs a value".into()))?;
                    budget = Some(
                        v.parse::<f64>()
                            .map_err(|e| parse_err(format!("bad budget {v}: {e}")))?,
                    );
                }
                "seed" => {
                    let v = fields
                        .next()
                        .ok_or_else(|| parse_err("seed needs a value".into()))?;
                    seed = Some(
                        v.parse::<u64>()
                            .map_err(|e| parse_err(format!("bad seed {v}: {e}")))?,
                    );
                }
                "item" => {
                    let mut next = |what: &str| {
                        fields
                            .next()
                            .ok_or_else(|| parse_err(format!("item record missing {what}")))
                    };
                    let id = next("id")?
                        .parse::<u64>()
                        .map_err(|e| parse_err(format!("bad item id: {e}")))?;
                    let cost = next("cost")?
                        .parse::<f64>()
                        .map_err(|e| parse_err(format!("bad item cost: {e}")))?;
                    let tag = next("distribution tag")?.to_string();
                    let rest: Vec<f64> = fields
                        .map(|v| {
                            v.parse::<f64>()
                                .map_err(|e| parse_err(format!("bad parameter {v}: {e}")))
                        })
                        .collect::<Result<_>>()?;
                    let dist = dist_from_parts(&tag, &rest)
                        .map_err(|e| parse_err(format!("{e}")))?;
                    items.push(Item { id, cost, dist });
                }
                other => {
                    return Err(parse_err(format!("unknown record {other}")));
                }
            }
        }
        let budget = budget.ok_or(Error::Parse {
            line: 0,
            message: "missing budget record".into(),
        })?;
        let mut instance = Instance::new(items, budget)?;
        instance.seed = seed;
        Ok(instance)
    }

    /// Structured-text (JSON) form, equivalent to the plain-text format and
    /// also bit-exact under round trip.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let inst: Instance = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        let seed = inst.seed;
        let mut checked = Instance::new(inst.items, inst.budget)?;
        checked.seed = seed;
        Ok(checked)
    }
}

fn dist_from_parts(tag: &str, params: &[f64]) -> Result<ValueDistribution> {
    let wrong_arity = |want: &str| {
        Err(Error::InvalidParameter(format!(
            "distribution {tag} expects {want} parameter(s), got {}",
            params.len()
        )))
    };
    let dist = match tag {
        "bernoulli" => match params {
            [mean] => ValueDistribution::Bernoulli { mean: *mean },
            _ => return wrong_arity("1"),
        },
        "exponential" => match params {
            [mean] => ValueDistribution::Exponential { mean: *mean },
            _ => return wrong_arity("1"),
        },
        "pareto" => match params {
            [shape, scale] => ValueDistribution::Pareto {
                shape: *shape,
                scale: *scale,
            },
            _ => return wrong_arity("2"),
        },
        "deterministic" => match params {
            [value] => ValueDistribution::Deterministic { value: *value },
            _ => return wrong_arity("1"),
        },
        "empirical" => {
            if params.is_empty() {
                return wrong_arity("1 or more");
            }
            ValueDistribution::Empirical {
                samples: params.to_vec(),
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown distribution tag {other}"
            )))
        }
    };
    dist.validate()?;
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, Seed};

    fn bern(mean: f64) -> ValueDistribution {
        ValueDistribution::Bernoulli { mean }
    }

    #[test]
    fn replication_count_floors() {
        let item = Item::new(1, 7.0, bern(0.5)).unwrap();
        assert_eq!(replication_count(&item, 30.0).unwrap(), 4);
        let item = Item::new(1, 30.0, bern(0.5)).unwrap();
        assert_eq!(replication_count(&item, 30.0).unwrap(), 1);
        let item = Item::new(1, 1.0, bern(0.5)).unwrap();
        assert_eq!(replication_count(&item, 30.0).unwrap(), 30);
    }

    #[test]
    fn replication_count_chain_inequality() {
        // 1 <= k <= budget/cost < k + 1 whenever the item is affordable.
        let mut rng = Seed(77).stream(Purpose::Fuzz, &[]);
        for _ in 0..1000 {
            let cost = 0.01 + 5.0 * rng.uniform();
            let budget = cost + 20.0 * rng.uniform();
            let item = Item::new(1, cost, bern(0.5)).unwrap();
            let k = replication_count(&item, budget).unwrap();
            assert!(k >= 1);
            assert!(k as f64 <= budget / cost);
            assert!(budget / cost < (k + 1) as f64);
        }
    }

    #[test]
    fn replication_count_rejects_unaffordable() {
        let item = Item::new(9, 31.0, bern(0.5)).unwrap();
        assert!(matches!(
            replication_count(&item, 30.0),
            Err(Error::InfeasibleItem { id: 9, .. })
        ));
    }

    #[test]
    fn means() {
        assert_eq!(bern(0.3).mean(), 0.3);
        assert_eq!(ValueDistribution::Deterministic { value: 2.5 }.mean(), 2.5);
        assert_eq!(
            ValueDistribution::Empirical { samples: vec![1.0, 2.0, 3.0] }.mean(),
            2.0
        );
    }

    #[test]
    fn pareto_from_mean_scale() {
        match pareto_from_mean(1.0, 2.0).unwrap() {
            ValueDistribution::Pareto { scale, .. } => assert_eq!(scale, 0.5),
            _ => unreachable!(),
        }
        match pareto_from_mean(2.0, 3.0).unwrap() {
            ValueDistribution::Pareto { scale, .. } => {
                assert!((scale - 4.0 / 3.0).abs() < 1e-15)
            }
            _ => unreachable!(),
        }
        let d = pareto_from_mean(0.7, 1.5).unwrap();
        assert!((d.mean() - 0.7).abs() < 1e-15);
        assert!(pareto_from_mean(0.7, 1.0).is_err());
    }

    #[test]
    fn deterministic_and_degenerate_sampling() {
        let mut rng = Seed(1).stream(Purpose::Fuzz, &[]);
        let d = ValueDistribution::Deterministic { value: 1.0 };
        assert_eq!(d.sample_values(3, &mut rng), vec![1.0, 1.0, 1.0]);
        let d = bern(1.0);
        assert_eq!(d.sample_values(2, &mut rng), vec![1.0, 1.0]);
    }

    #[test]
    fn bernoulli_law_of_large_numbers() {
        let mut rng = Seed(11).stream(Purpose::Fuzz, &[0]);
        let xs = bern(0.5).sample_values(100_000, &mut rng);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "sample mean {mean}");
    }

    #[test]
    fn empirical_of_samples_converges_to_mean() {
        // Exercises each family at N = 1e5 with a 3-standard-error tolerance.
        let cases = vec![
            (bern(0.37), (0.37_f64 * 0.63).sqrt()),
            (ValueDistribution::Exponential { mean: 0.8 }, 0.8),
            (pareto_from_mean(1.0, 3.0).unwrap(), {
                // Var = a xm^2 / ((a-1)^2 (a-2)) for a > 2.
                let (a, xm) = (3.0_f64, 2.0 / 3.0);
                (a * xm * xm / ((a - 1.0) * (a - 1.0) * (a - 2.0))).sqrt()
            }),
        ];
        for (i, (dist, sd)) in cases.into_iter().enumerate() {
            let mut rng = Seed(12).stream(Purpose::Fuzz, &[i as u64]);
            let n = 100_000;
            let emp = ValueDistribution::Empirical {
                samples: dist.sample_values(n, &mut rng),
            };
            let se = sd / (n as f64).sqrt();
            assert!(
                (emp.mean() - dist.mean()).abs() <= 3.0 * se,
                "{dist:?}: {} vs {}",
                emp.mean(),
                dist.mean()
            );
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = ValueDistribution::Exponential { mean: 2.0 };
        let a = d.sample_values(16, &mut Seed(7).stream(Purpose::Estimation, &[3]));
        let b = d.sample_values(16, &mut Seed(7).stream(Purpose::Estimation, &[3]));
        assert_eq!(a, b);
        let c = d.sample_values(16, &mut Seed(7).stream(Purpose::Estimation, &[4]));
        assert_ne!(a, c);
    }

    #[test]
    fn instance_rejects_bad_items() {
        let items = vec![
            Item::new(1, 2.0, bern(0.5)).unwrap(),
            Item::new(1, 1.0, bern(0.4)).unwrap(),
        ];
        assert!(matches!(
            Instance::new(items, 10.0),
            Err(Error::DuplicateId(1))
        ));
        let items = vec![Item::new(1, 11.0, bern(0.5)).unwrap()];
        assert!(matches!(
            Instance::new(items, 10.0),
            Err(Error::InfeasibleItem { .. })
        ));
        assert!(Item::new(1, 0.0, bern(0.5)).is_err());
        assert!(Item::new(1, -1.0, bern(0.5)).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let items = vec![
            Item::new(1, 1.5, bern(0.3)).unwrap(),
            Item::new(2, 2.0, ValueDistribution::Exponential { mean: 0.7 }).unwrap(),
            Item::new(3, 1.0, pareto_from_mean(0.9, 1.5).unwrap()).unwrap(),
            Item::new(4, 1.0, ValueDistribution::Deterministic { value: 2.5 }).unwrap(),
            Item::new(
                5,
                1.0,
                ValueDistribution::Empirical { samples: vec![0.1, 0.5, 0.9] },
            )
            .unwrap(),
        ];
        let inst = Instance::new(items, 30.0).unwrap().with_seed(42);
        let text = inst.to_text();
        let back = Instance::from_text(&text).unwrap();
        assert_eq!(inst, back);
        assert_eq!(text, back.to_text());
        let json = inst.to_json();
        assert_eq!(inst, Instance::from_json(&json).unwrap());
    }

    #[test]
    fn text_parse_reports_line_numbers() {
        let text = "budget 10.0\nitem 1 2.0 bernoulli nope\n";
        match Instance::from_text(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn support_atoms_merge_duplicates() {
        let d = ValueDistribution::Empirical { samples: vec![1.0, 2.0, 1.0, 2.0] };
        let atoms = d.support_atoms().unwrap();
        assert_eq!(atoms.len(), 2);
        assert!((atoms[0].1 - 0.5).abs() < 1e-15);
        assert!(ValueDistribution::Exponential { mean: 1.0 }
            .support_atoms()
            .is_none());
    }

    #[test]
    fn truncated_bounds() {
        let d = ValueDistribution::Exponential { mean: 2.0 };
        let b = d.truncated_bound(1.0 - 1e-6).unwrap();
        assert!((b - 2.0 * (1e-6_f64).ln().abs()).abs() < 1e-9);
        assert_eq!(bern(0.5).truncated_bound(0.999).unwrap(), 1.0);
    }
}
