//! Symmetric monotone group-value functions with diminishing returns.
//!
//! Every variant evaluates a nonnegative vector of item values and is
//! invariant under permutation and zero padding, so the empty vector behaves
//! like an all-zero input. Curvature measures distance from modularity:
//! 0 means marginals never shrink, 1 means they can vanish entirely.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Success-probability map: increasing, maps 0 to 0, bounded by 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessFn {
    /// p(x) = min(x, 1)
    Capped,
    /// p(x) = 1 - e^{-x}
    ExpSaturating,
}

impl SuccessFn {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            SuccessFn::Capped => x.min(1.0),
            SuccessFn::ExpSaturating => -(-x).exp_m1(),
        }
    }
}

/// Group-value function variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueFunction {
    /// Sum of entries.
    Modular,
    /// (sum of entries)^exponent with exponent in (0, 1]; 0.5 is the square
    /// root production function.
    Power { exponent: f64 },
    /// price * s / (saturation + s) on the entry sum s; the saturating
    /// total-production form used for assortment values.
    Saturating { price: f64, saturation: f64 },
    /// Sum of the `count` largest entries; count 1 is best-shot (max).
    TopR { count: usize },
    /// (sum of entries^degree)^(1/degree), degree > 1.
    Ces { degree: f64 },
    /// 1 - prod(1 - p(entry)).
    SuccessProbability { pfn: SuccessFn },
    /// Nonnegative linear combination of other variants; covers weighted
    /// coverage and facility-location style aggregates.
    Combination(Vec<(f64, ValueFunction)>),
}

impl ValueFunction {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            ValueFunction::Modular | ValueFunction::SuccessProbability { .. } => Ok(()),
            ValueFunction::Power { exponent } => {
                if !exponent.is_finite() || *exponent <= 0.0 || *exponent > 1.0 {
                    return fail(format!("power exponent {exponent} not in (0, 1]"));
                }
                Ok(())
            }
            ValueFunction::Saturating { price, saturation } => {
                if !price.is_finite() || *price <= 0.0 {
                    return fail(format!("saturating price {price} must be positive"));
                }
                if !saturation.is_finite() || *saturation <= 0.0 {
                    return fail(format!("saturation constant {saturation} must be positive"));
                }
                Ok(())
            }
            ValueFunction::TopR { count } => {
                if *count < 1 {
                    return fail("top-r count must be at least 1".into());
                }
                Ok(())
            }
            ValueFunction::Ces { degree } => {
                if !degree.is_finite() || *degree <= 1.0 {
                    return fail(format!("ces degree {degree} must exceed 1"));
                }
                Ok(())
            }
            ValueFunction::Combination(parts) => {
                if parts.is_empty() {
                    return fail("combination needs at least one component".into());
                }
                for (w, g) in parts {
                    if !w.is_finite() || *w < 0.0 {
                        return fail(format!("combination weight {w} must be nonnegative"));
                    }
                    g.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Evaluate on a nonnegative vector. The empty vector evaluates like an
    /// all-zero input.
    pub fn evaluate(&self, xs: &[f64]) -> Result<f64> {
        if let Some(bad) = xs.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!("entry {bad} is not a nonnegative real")));
        }
        Ok(self.eval(xs))
    }

    /// Evaluation without the domain check, for hot paths feeding known
    /// nonnegative samples.
    pub fn eval(&self, xs: &[f64]) -> f64 {
        match self {
            ValueFunction::Modular => xs.iter().sum(),
            ValueFunction::Power { exponent } => xs.iter().sum::<f64>().powf(*exponent),
            ValueFunction::Saturating { price, saturation } => {
                let s: f64 = xs.iter().sum();
                price * s / (saturation + s)
            }
            ValueFunction::TopR { count } => {
                let mut v = xs.to_vec();
                v.sort_by(|a, b| b.total_cmp(a));
                v.iter().take(*count).sum()
            }
            ValueFunction::Ces { degree } => {
                xs.iter().map(|x| x.powf(*degree)).sum::<f64>().powf(1.0 / degree)
            }
            ValueFunction::SuccessProbability { pfn } => {
                1.0 - xs.iter().map(|&x| 1.0 - pfn.apply(x)).product::<f64>()
            }
            ValueFunction::Combination(parts) => {
                parts.iter().map(|(w, g)| w * g.eval(xs)).sum()
            }
        }
    }

    /// Marginal value of appending `z`: evaluate of xs extended by z, minus
    /// evaluate of xs alone.
    /// Nonnegative for every variant by monotonicity.
    pub fn marginal(&self, xs: &[f64], z: f64) -> Result<f64> {
        if !z.is_finite() || z < 0.0 {
            return Err(Error::Domain(format!("appended entry {z} is not a nonnegative real")));
        }
        let base = self.evaluate(xs)?;
        let mut ext = xs.to_vec();
        ext.push(z);
        Ok(self.eval(&ext) - base)
    }

    /// Supremum of the function over [0, bound]^k and of its one-argument
    /// restriction over [0, bound]. Monotonicity puts both maxima at the
    /// upper corner.
    pub fn sup_norms(&self, bound: f64, k: u64) -> Result<(f64, f64)> {
        if !bound.is_finite() || bound < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "support bound {bound} must be a nonnegative real"
            )));
        }
        if k < 1 {
            return Err(Error::InvalidParameter("replication count must be at least 1".into()));
        }
        let kf = k as f64;
        Ok(match self {
            ValueFunction::Modular => (kf * bound, bound),
            ValueFunction::Power { exponent } => {
                ((kf * bound).powf(*exponent), bound.powf(*exponent))
            }
            ValueFunction::Saturating { price, saturation } => (
                price * kf * bound / (saturation + kf * bound),
                price * bound / (saturation + bound),
            ),
            ValueFunction::TopR { count } => {
                ((*count).min(k as usize) as f64 * bound, bound)
            }
            ValueFunction::Ces { degree } => (kf.powf(1.0 / degree) * bound, bound),
            ValueFunction::SuccessProbability { pfn } => {
                let p = pfn.apply(bound);
                (1.0 - (1.0 - p).powi(k as i32), p)
            }
            ValueFunction::Combination(parts) => {
                let mut g = 0.0;
                let mut g1 = 0.0;
                for (w, part) in parts {
                    let (a, b) = part.sup_norms(bound, k)?;
                    g += w * a;
                    g1 += w * b;
                }
                (g, g1)
            }
        })
    }

    /// Configuration tag, e.g. `modular`, `ces:2`, `topr:1`, `power:0.5`,
    /// `sat:1:1`, `succ:exp`.
    pub fn tag(&self) -> String {
        match self {
            ValueFunction::Modular => "modular".into(),
            ValueFunction::Power { exponent } => format!("power:{exponent}"),
            ValueFunction::Saturating { price, saturation } => {
                format!("sat:{price}:{saturation}")
            }
            ValueFunction::TopR { count } => format!("topr:{count}"),
            ValueFunction::Ces { degree } => format!("ces:{degree}"),
            ValueFunction::SuccessProbability { pfn } => match pfn {
                SuccessFn::Capped => "succ:cap".into(),
                SuccessFn::ExpSaturating => "succ:exp".into(),
            },
            ValueFunction::Combination(_) => "combination".into(),
        }
    }

    /// Curvature: analytic where known, otherwise a sampled lower-bound
    /// estimate of the defining supremum (10^4 triples, fixed internal
    /// seed so the result is deterministic).
    pub fn curvature(&self) -> CurvatureInfo {
        match self {
            ValueFunction::Modular => CurvatureInfo::analytic(0.0),
            ValueFunction::Power { exponent } if *exponent == 1.0 => CurvatureInfo::analytic(0.0),
            ValueFunction::TopR { count } if *count == 1 => CurvatureInfo::analytic(1.0),
            _ => {
                let mut rng = crate::rng::Seed(0x43555256).stream(crate::rng::Purpose::Curvature, &[]);
                CurvatureInfo::sampled(self.sampled_curvature(10_000, &mut rng))
            }
        }
    }

    /// Sampled lower bound of the curvature supremum over random
    /// (subvector, vector, appended value) triples.
    pub fn sampled_curvature(&self, trials: usize, rng: &mut StreamRng) -> f64 {
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let (x, y, z) = sample_subvector_triple(rng);
            let m_small = self.eval(&with(&x, z)) - self.eval(&x);
            let m_big = self.eval(&with(&y, z)) - self.eval(&y);
            if m_small > 1e-12 {
                worst = worst.max(1.0 - m_big / m_small);
            }
        }
        worst.clamp(0.0, 1.0)
    }
}

fn with(xs: &[f64], z: f64) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.push(z);
    v
}

/// Random vector y, subvector x (random subset of y's entries), and z >= 0.
fn sample_subvector_triple(rng: &mut StreamRng) -> (Vec<f64>, Vec<f64>, f64) {
    let len = rng.index(6) + 1;
    let scale = [0.25, 1.0, 4.0][rng.index(3)];
    let y: Vec<f64> = (0..len).map(|_| rng.uniform() * scale).collect();
    let x: Vec<f64> = y.iter().copied().filter(|_| rng.uniform() < 0.5).collect();
    let z = rng.uniform() * scale;
    (x, y, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSource {
    Analytic,
    SampledEstimate,
}

/// Curvature value plus how it was obtained. Guarantee calculations should
/// only trust `Analytic` values unless the caller opts in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureInfo {
    pub alpha: f64,
    pub source: CurvatureSource,
}

impl CurvatureInfo {
    fn analytic(alpha: f64) -> CurvatureInfo {
        CurvatureInfo { alpha, source: CurvatureSource::Analytic }
    }

    fn sampled(alpha: f64) -> CurvatureInfo {
        CurvatureInfo { alpha, source: CurvatureSource::SampledEstimate }
    }
}

/// First counterexample found by the diminishing-returns probe.
#[derive(Debug, Clone)]
pub struct DrCounterexample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: f64,
    pub marginal_small: f64,
    pub marginal_big: f64,
}

#[derive(Debug, Clone)]
pub struct DrReport {
    pub passed: bool,
    pub trials: usize,
    pub counterexample: Option<DrCounterexample>,
}

/// Probe the diminishing-returns property on random (x subvector of y, z)
/// triples: the marginal at the smaller vector must dominate, up to a 1e-9
/// absolute float tolerance. The probe value is placed in the first slot as
/// well as the last so position-sensitive (non-symmetric) maps are exercised
/// through it.
pub fn check_dr_property<F>(f: F, trials: usize, rng: &mut StreamRng) -> DrReport
where
    F: Fn(&[f64]) -> f64,
{
    const TOL: f64 = 1e-9;
    for t in 0..trials {
        let (x, y, z) = sample_subvector_triple(rng);
        for prepend in [false, true] {
            let compose = |v: &[f64]| -> Vec<f64> {
                if prepend {
                    let mut out = vec![z];
                    out.extend_from_slice(v);
                    out
                } else {
                    with(v, z)
                }
            };
            let m_small = f(&compose(&x)) - f(&x);
            let m_big = f(&compose(&y)) - f(&y);
            if m_small < m_big - TOL {
                return DrReport {
                    passed: false,
                    trials: t + 1,
                    counterexample: Some(DrCounterexample {
                        x,
                        y,
                        z,
                        marginal_small: m_small,
                        marginal_big: m_big,
                    }),
                };
            }
        }
    }
    DrReport { passed: true, trials, counterexample: None }
}

/// Probe the stronger, value-ordered form of diminishing returns: whenever
/// g(x) <= g(y) for arbitrary vectors (no subvector relation), the marginal
/// at y must not exceed the marginal at x. Sum-based variants and best-shot
/// satisfy it; top-r with r > 1 does not, even though it keeps the weaker
/// subvector form.
pub fn check_value_ordered_dr<F>(f: F, trials: usize, rng: &mut StreamRng) -> DrReport
where
    F: Fn(&[f64]) -> f64,
{
    const TOL: f64 = 1e-9;
    for t in 0..trials {
        let scale = [0.25, 1.0, 4.0][rng.index(3)];
        let draw = |rng: &mut StreamRng| -> Vec<f64> {
            let len = rng.index(6) + 1;
            (0..len).map(|_| rng.uniform() * scale).collect()
        };
        let a = draw(rng);
        let b = draw(rng);
        let (x, y) = if f(&a) <= f(&b) { (a, b) } else { (b, a) };
        let z = rng.uniform() * scale;
        let m_small = f(&with(&x, z)) - f(&x);
        let m_big = f(&with(&y, z)) - f(&y);
        if m_small < m_big - TOL {
            return DrReport {
                passed: false,
                trials: t + 1,
                counterexample: Some(DrCounterexample {
                    x,
                    y,
                    z,
                    marginal_small: m_small,
                    marginal_big: m_big,
                }),
            };
        }
    }
    DrReport { passed: true, trials, counterexample: None }
}

impl fmt::Display for ValueFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

impl FromStr for ValueFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<ValueFunction> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidParameter(format!("unknown value function tag {s}"));
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let vf = match parts.as_slice() {
            ["modular"] => ValueFunction::Modular,
            ["power", a] => ValueFunction::Power { exponent: parse_f64(a)? },
            ["sat", p, v0] => ValueFunction::Saturating {
                price: parse_f64(p)?,
                saturation: parse_f64(v0)?,
            },
            ["topr", r] => ValueFunction::TopR {
                count: r.parse::<usize>().map_err(|_| bad())?,
            },
            ["ces", r] => ValueFunction::Ces { degree: parse_f64(r)? },
            ["succ", "cap"] => ValueFunction::SuccessProbability { pfn: SuccessFn::Capped },
            ["succ", "exp"] => ValueFunction::SuccessProbability { pfn: SuccessFn::ExpSaturating },
            _ => return Err(bad()),
        };
        vf.validate()?;
        Ok(vf)
    }
}
