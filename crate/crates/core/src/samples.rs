//! Sufficient-sample-size calculators for score estimation and the
//! approximation-factor calculator for the guarantee regimes.
//!
//! The sample sizes are closed-form plug-ins of concentration bounds; they
//! are sufficient, not tight, so observed coverage usually far exceeds the
//! requested confidence. All per-item sizes are rounded up to a whole number
//! of batches so the estimator consumes complete groups of k draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative-error tolerance and failure probability for score estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySpec {
    /// Relative error in (0, 1].
    pub epsilon: f64,
    /// Failure probability in (0, 1).
    pub delta: f64,
}

impl AccuracySpec {
    pub fn new(epsilon: f64, delta: f64) -> Result<AccuracySpec> {
        if !epsilon.is_finite() || epsilon <= 0.0 || epsilon > 1.0 {
            return Err(Error::OutOfRange(format!("epsilon {epsilon} not in (0, 1]")));
        }
        if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
            return Err(Error::OutOfRange(format!("delta {delta} not in (0, 1)")));
        }
        Ok(AccuracySpec { epsilon, delta })
    }
}

fn check_k(k: u64) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidParameter("replication count must be at least 1".into()));
    }
    Ok(())
}

/// Round a raw sample count up to a whole number of k-sized batches, with a
/// floor of one batch.
fn batches_of(t_raw: f64, k: u64) -> u64 {
    let batches = (t_raw / k as f64).ceil().max(1.0);
    k * batches as u64
}

/// Sample size from the bounded-range concentration route:
/// T >= (1/2) k g_sup^2 / (eps^2 r^2) ln(1/delta), rounded to whole batches.
pub fn hoeffding_samples(k: u64, g_sup: f64, score: f64, acc: &AccuracySpec) -> Result<u64> {
    check_k(k)?;
    if !g_sup.is_finite() || g_sup <= 0.0 {
        return Err(Error::InvalidParameter(format!("sup norm {g_sup} must be positive")));
    }
    if !score.is_finite() || score <= 0.0 {
        return Err(Error::UndefinedBound(format!(
            "relative error against score {score} is undefined"
        )));
    }
    let t = 0.5 * k as f64 * g_sup * g_sup / (acc.epsilon * acc.epsilon * score * score)
        * (1.0 / acc.delta).ln();
    Ok(batches_of(t, k))
}

/// Sample size from the bounded-difference route, which charges each draw
/// its single-argument marginal:
/// T >= (1/2) k^2 g1_sup^2 / (eps^2 r^2) ln(1/delta), rounded to whole
/// batches.
pub fn mcdiarmid_samples(k: u64, g1_sup: f64, score: f64, acc: &AccuracySpec) -> Result<u64> {
    check_k(k)?;
    if !g1_sup.is_finite() || g1_sup <= 0.0 {
        return Err(Error::InvalidParameter(format!("sup norm {g1_sup} must be positive")));
    }
    if !score.is_finite() || score <= 0.0 {
        return Err(Error::UndefinedBound(format!(
            "relative error against score {score} is undefined"
        )));
    }
    let kf = k as f64;
    let t = 0.5 * kf * kf * g1_sup * g1_sup / (acc.epsilon * acc.epsilon * score * score)
        * (1.0 / acc.delta).ln();
    Ok(batches_of(t, k))
}

/// Curvature-based sample size, independent of the replication count:
/// T >= (1/2) g1_sup^2 / ((1-alpha)^2 eps^2 mu1^2) ln(1/delta).
/// Callers round to batches themselves when a k is in play.
pub fn curvature_samples(g1_sup: f64, mu1: f64, alpha: f64, acc: &AccuracySpec) -> Result<u64> {
    if !g1_sup.is_finite() || g1_sup <= 0.0 {
        return Err(Error::InvalidParameter(format!("sup norm {g1_sup} must be positive")));
    }
    if !mu1.is_finite() || mu1 <= 0.0 {
        return Err(Error::UndefinedBound(format!(
            "single-copy mean {mu1} must be positive"
        )));
    }
    if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!(
            "curvature {alpha} must be in [0, 1) for a finite bound"
        )));
    }
    let denom = (1.0 - alpha) * (1.0 - alpha) * acc.epsilon * acc.epsilon * mu1 * mu1;
    let t = 0.5 * g1_sup * g1_sup / denom * (1.0 / acc.delta).ln();
    Ok(t.ceil().max(1.0) as u64)
}

/// Per-item sample sizes sufficient for the ranking's budget-cut prefix to
/// be accurate within relative error eps with probability 1 - delta:
/// T_i >= 2 min(k_i g_sup^2, k_i^2 g1_sup^2) / (eps^2 r_cut^2) ln(2n/delta).
/// `score_cut` is the true score at the cut position.
pub fn topset_samples(
    ks: &[u64],
    g_sup: f64,
    g1_sup: f64,
    score_cut: f64,
    n: usize,
    acc: &AccuracySpec,
) -> Result<Vec<u64>> {
    if !score_cut.is_finite() || score_cut <= 0.0 {
        return Err(Error::UndefinedBound(format!(
            "cut score {score_cut} must be positive"
        )));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("need at least one item".into()));
    }
    let log_term = (2.0 * n as f64 / acc.delta).ln();
    ks.iter()
        .map(|&k| {
            check_k(k)?;
            let kf = k as f64;
            let numer = (kf * g_sup * g_sup).min(kf * kf * g1_sup * g1_sup);
            let t = 2.0 * numer / (acc.epsilon * acc.epsilon * score_cut * score_cut) * log_term;
            Ok(batches_of(t, k))
        })
        .collect()
}

/// Per-item sample sizes sufficient for fully accurate ranking around the
/// budget cut when the two adjacent score gaps there are at least 2 * gap:
/// T_i >= (1/2) min(k_i g_sup^2, k_i^2 g1_sup^2) / gap^2 ln(2n/delta).
pub fn gap_samples(
    ks: &[u64],
    g_sup: f64,
    g1_sup: f64,
    gap: f64,
    n: usize,
    delta: f64,
) -> Result<Vec<u64>> {
    if !gap.is_finite() || gap <= 0.0 {
        return Err(Error::UndefinedBound(format!("score gap {gap} must be positive")));
    }
    if !(0.0..1.0).contains(&delta) || delta <= 0.0 {
        return Err(Error::OutOfRange(format!("delta {delta} not in (0, 1)")));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("need at least one item".into()));
    }
    let log_term = (2.0 * n as f64 / delta).ln();
    ks.iter()
        .map(|&k| {
            check_k(k)?;
            let kf = k as f64;
            let numer = (kf * g_sup * g_sup).min(kf * kf * g1_sup * g1_sup);
            let t = 0.5 * numer / (gap * gap) * log_term;
            Ok(batches_of(t, k))
        })
        .collect()
}

/// Which guarantee applies: the general constant, the cost-regular refinement
/// (each cost at most beta * B, or all replication counts within factor
/// 1 - beta), or the curvature-parametrized refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuaranteeRegime {
    General,
    BetaCosts {
        beta: f64,
    },
    Curvature {
        alpha: f64,
        /// Optional cost-regularity parameter; combines with curvature.
        beta: Option<f64>,
        /// Relative cost of the cut prefix plus the first rejected item.
        /// Defaults to the conservative 1.7 when not measured.
        relative_cost: Option<f64>,
    },
}

/// (1 - e^{-a x}) / a with its a -> 0 limit x.
fn exp_ratio(a: f64, x: f64) -> f64 {
    if a < 1e-12 {
        x
    } else {
        -(-a * x).exp_m1() / a
    }
}

/// Worst-case approximation factor of the two-candidate greedy under the
/// given regime and ranking error eps.
pub fn guarantee_factor(regime: &GuaranteeRegime, epsilon: f64) -> Result<f64> {
    if !epsilon.is_finite() || !(0.0..1.0).contains(&epsilon) {
        return Err(Error::OutOfRange(format!("epsilon {epsilon} not in [0, 1)")));
    }
    let p = 1.0 - (-1.0_f64).exp();
    match regime {
        GuaranteeRegime::General => {
            let q = 1.0 + 1.7 + 2.0 * 1.7_f64.sqrt();
            Ok((1.0 - epsilon) * p / ((1.0 - epsilon) * p + 2.0 * q))
        }
        GuaranteeRegime::BetaCosts { beta } => {
            if !beta.is_finite() || !(0.0..=0.5).contains(beta) {
                return Err(Error::OutOfRange(format!("beta {beta} not in [0, 1/2]")));
            }
            if *beta == 0.5 {
                return Ok(0.0);
            }
            let q = (4.0 + 3.0 * beta / (1.0 - beta)) * (1.0 + beta / (1.0 - 2.0 * beta));
            Ok((1.0 - epsilon) * p / ((1.0 - epsilon) * p + q))
        }
        GuaranteeRegime::Curvature { alpha, beta, relative_cost } => {
            if !alpha.is_finite() || !(0.0..=1.0).contains(alpha) {
                return Err(Error::OutOfRange(format!("alpha {alpha} not in [0, 1]")));
            }
            match beta {
                None => {
                    let d = relative_cost.unwrap_or(1.7);
                    if !d.is_finite() || d <= 0.0 {
                        return Err(Error::OutOfRange(format!(
                            "relative cost {d} must be positive"
                        )));
                    }
                    Ok((1.0 - epsilon) * (1.0 - alpha) * (exp_ratio(*alpha, d) / d) * (5.0 / 17.0))
                }
                Some(beta) => {
                    if !beta.is_finite() || !(0.0..=1.0).contains(beta) {
                        return Err(Error::OutOfRange(format!("beta {beta} not in [0, 1]")));
                    }
                    let x = (1.0 - 2.0 * beta) / (1.0 - beta);
                    Ok((1.0 - epsilon) * (1.0 - alpha) * (1.0 - beta) * exp_ratio(*alpha, x))
                }
            }
        }
    }
}
