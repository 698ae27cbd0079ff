//! Selection algorithms: the two-candidate score-ranked greedy, its
//! single-pass streaming variant, the lazy value-oracle greedy benchmark
//! (better of a benefit pass and a benefit-per-cost pass), and an exact
//! brute-force oracle for small finite-support instances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Item};
use crate::rng::{Purpose, Seed};
use crate::scores::{exact_utility, ScoreTable};
use crate::value_fn::ValueFunction;

/// Which candidate set a solution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    /// Greedy prefix of the score ranking (or the streaming buffer minus its
    /// weakest member).
    SStar,
    /// The candidate seeded with the first item the prefix rejected.
    SStarStar,
    /// The weakest buffered item alone (streaming).
    Singleton,
    Celf,
    Exact,
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Winner::SStar => "s_star",
            Winner::SStarStar => "s_star_star",
            Winner::Singleton => "singleton",
            Winner::Celf => "celf",
            Winner::Exact => "exact",
        };
        write!(f, "{s}")
    }
}

/// A candidate set together with its evaluated utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Item ids, ascending.
    pub ids: Vec<u64>,
    pub cost: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// A solver's output. Always feasible: total cost within budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Selected item ids, ascending.
    pub selected: Vec<u64>,
    pub total_cost: f64,
    pub utility_estimate: f64,
    pub utility_stderr: f64,
    pub winner: Winner,
    /// The candidate sets the winner was chosen from, in construction order.
    pub candidates: Vec<Candidate>,
}

pub fn solution_csv_header() -> &'static str {
    "algorithm,seed,n,budget,value_fn,selected,cost,utility_estimate,utility_stderr"
}

pub fn solution_csv_row(
    algorithm: &str,
    seed: u64,
    n: usize,
    budget: f64,
    value_fn: &str,
    sol: &Solution,
) -> String {
    let ids: Vec<String> = sol.selected.iter().map(|id| id.to_string()).collect();
    format!(
        "{algorithm},{seed},{n},{budget:?},{value_fn},{},{:?},{:?},{:?}",
        ids.join(";"),
        sol.total_cost,
        sol.utility_estimate,
        sol.utility_stderr
    )
}

/// Buffer behavior of one streaming run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamStats {
    pub peak_buffer_items: usize,
    pub updates: usize,
    /// Buffer contents at end of stream, ranked by score descending.
    pub final_buffer: Vec<u64>,
}

/// Estimates the utility of a candidate set. Implementations must be safe to
/// call repeatedly; each call may consume fresh randomness.
pub trait SetEvaluator {
    /// Returns (estimate, standard error).
    fn evaluate_set(&mut self, ids: &[u64]) -> Result<(f64, f64)>;
}

/// Monte Carlo utility estimates with per-call, per-item streams, disjoint
/// from estimation draws.
pub struct MonteCarloEvaluator<'a> {
    instance: &'a Instance,
    g: &'a ValueFunction,
    reps: usize,
    seed: Seed,
    purpose: Purpose,
    calls: u64,
}

impl<'a> MonteCarloEvaluator<'a> {
    pub fn new(
        instance: &'a Instance,
        g: &'a ValueFunction,
        reps: usize,
        seed: Seed,
        purpose: Purpose,
    ) -> MonteCarloEvaluator<'a> {
        MonteCarloEvaluator { instance, g, reps, seed, purpose, calls: 0 }
    }
}

impl SetEvaluator for MonteCarloEvaluator<'_> {
    fn evaluate_set(&mut self, ids: &[u64]) -> Result<(f64, f64)> {
        self.calls += 1;
        if ids.is_empty() {
            return Ok((self.g.eval(&[]), 0.0));
        }
        let draws: Vec<Vec<f64>> = ids
            .iter()
            .map(|&id| {
                let item = self.instance.item(id)?;
                let mut rng = self.seed.stream(self.purpose, &[self.calls, id]);
                Ok(item.dist.sample_values(self.reps, &mut rng))
            })
            .collect::<Result<_>>()?;
        let mut buf = vec![0.0; ids.len()];
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for rep in 0..self.reps {
            for (j, col) in draws.iter().enumerate() {
                buf[j] = col[rep];
            }
            let v = self.g.eval(&buf);
            let delta = v - mean;
            mean += delta / (rep + 1) as f64;
            m2 += delta * (v - mean);
        }
        let stderr = if self.reps > 1 {
            let var = m2 / (self.reps - 1) as f64;
            (var.max(0.0) / self.reps as f64).sqrt()
        } else {
            0.0
        };
        Ok((mean, stderr))
    }
}

/// Exact utilities by finite-support enumeration; for oracle-grade tests.
pub struct ExactEvaluator<'a> {
    instance: &'a Instance,
    g: &'a ValueFunction,
    cap: u64,
}

impl<'a> ExactEvaluator<'a> {
    pub fn new(instance: &'a Instance, g: &'a ValueFunction, cap: u64) -> ExactEvaluator<'a> {
        ExactEvaluator { instance, g, cap }
    }
}

impl SetEvaluator for ExactEvaluator<'_> {
    fn evaluate_set(&mut self, ids: &[u64]) -> Result<(f64, f64)> {
        Ok((exact_utility(self.instance, self.g, ids, self.cap)?, 0.0))
    }
}

#[derive(Debug, Clone, Copy)]
struct Ranked {
    id: u64,
    cost: f64,
    score: f64,
}

/// Items sorted by estimated score descending, ties by ascending id.
fn ranked_items(instance: &Instance, scores: &ScoreTable) -> Result<Vec<Ranked>> {
    let mut ranked = Vec::with_capacity(instance.len());
    for item in instance.items() {
        let entry = scores.get(item.id)?;
        ranked.push(Ranked { id: item.id, cost: item.cost, score: entry.r_hat });
    }
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    Ok(ranked)
}

fn sorted_ids(picked: &[usize], ranked: &[Ranked]) -> Vec<u64> {
    let mut ids: Vec<u64> = picked.iter().map(|&i| ranked[i].id).collect();
    ids.sort_unstable();
    ids
}

/// Two-candidate greedy selection on estimated replication test scores.
///
/// Ranks items by score, takes the longest affordable prefix and greedily
/// tops it up as the first candidate; seeds the second candidate with the
/// first rejected item and greedily fills around it; returns whichever
/// evaluates better (ties keep the prefix candidate).
pub fn tsg(
    instance: &Instance,
    scores: &ScoreTable,
    eval_reps: usize,
    seed: Seed,
) -> Result<Solution> {
    if eval_reps < 1 {
        return Err(Error::InvalidParameter("eval_reps must be at least 1".into()));
    }
    let g: ValueFunction = scores.value_fn.parse()?;
    let mut evaluator = MonteCarloEvaluator::new(instance, &g, eval_reps, seed, Purpose::Evaluation);
    tsg_with(instance, scores, &mut evaluator)
}

/// `tsg` with the candidate comparison delegated to `evaluator`, e.g. an
/// exact enumerator in oracle tests.
pub fn tsg_with(
    instance: &Instance,
    scores: &ScoreTable,
    evaluator: &mut dyn SetEvaluator,
) -> Result<Solution> {
    if instance.is_empty() {
        return Err(Error::Domain("cannot solve an empty instance".into()));
    }
    let ranked = ranked_items(instance, scores)?;
    let budget = instance.budget();

    let mut prefix_cost = 0.0;
    let mut cut = 0;
    for item in &ranked {
        if prefix_cost + item.cost <= budget {
            prefix_cost += item.cost;
            cut += 1;
        } else {
            break;
        }
    }

    if cut == ranked.len() {
        // Everything fits; there is no rejected item to seed a second
        // candidate with.
        let ids = sorted_ids(&(0..cut).collect::<Vec<_>>(), &ranked);
        let (estimate, stderr) = evaluator.evaluate_set(&ids)?;
        let candidate = Candidate { ids: ids.clone(), cost: prefix_cost, estimate, stderr };
        return Ok(Solution {
            selected: ids,
            total_cost: prefix_cost,
            utility_estimate: estimate,
            utility_stderr: stderr,
            winner: Winner::SStar,
            candidates: vec![candidate],
        });
    }

    // First candidate: the affordable prefix plus whatever still fits beyond
    // the rejected item.
    let mut star: Vec<usize> = (0..cut).collect();
    let mut star_cost = prefix_cost;
    for (i, item) in ranked.iter().enumerate().skip(cut + 1) {
        if star_cost + item.cost <= budget {
            star.push(i);
            star_cost += item.cost;
        }
    }

    // Second candidate: seeded with the first rejected item, then a greedy
    // fill over the remaining ranking.
    let mut second: Vec<usize> = vec![cut];
    let mut second_cost = ranked[cut].cost;
    for i in (0..cut).chain(cut + 1..ranked.len()) {
        if i == cut {
            continue;
        }
        if second_cost + ranked[i].cost <= budget {
            second.push(i);
            second_cost += ranked[i].cost;
        }
    }

    let star_ids = sorted_ids(&star, &ranked);
    let second_ids = sorted_ids(&second, &ranked);
    let (star_est, star_se) = evaluator.evaluate_set(&star_ids)?;
    let (second_est, second_se) = evaluator.evaluate_set(&second_ids)?;

    let candidates = vec![
        Candidate { ids: star_ids.clone(), cost: star_cost, estimate: star_est, stderr: star_se },
        Candidate {
            ids: second_ids.clone(),
            cost: second_cost,
            estimate: second_est,
            stderr: second_se,
        },
    ];
    let solution = if second_est > star_est {
        Solution {
            selected: second_ids,
            total_cost: second_cost,
            utility_estimate: second_est,
            utility_stderr: second_se,
            winner: Winner::SStarStar,
            candidates,
        }
    } else {
        Solution {
            selected: star_ids,
            total_cost: star_cost,
            utility_estimate: star_est,
            utility_stderr: star_se,
            winner: Winner::SStar,
            candidates,
        }
    };
    debug_assert!(solution.total_cost <= budget * (1.0 + 1e-9));
    Ok(solution)
}

struct Buffered {
    item: Item,
    score: f64,
}

/// Single-pass streaming selection. The buffer keeps the highest-scored
/// items whose cost just exceeds the budget; at end of stream the weakest
/// buffered item competes alone against the rest of the buffer.
///
/// A new item is inserted once the buffer is over budget only when its score
/// strictly beats a stored one; equal-score late arrivals are dropped. After
/// every insertion the buffer is pruned back to the shortest score-ranked
/// prefix whose cost exceeds the budget, so the returned sets stay feasible
/// no matter where in the arrival order the budget first overflowed.
pub fn streaming_tsg<I, F>(
    stream: I,
    budget: f64,
    g: &ValueFunction,
    score_fn: F,
    eval_reps: usize,
    seed: Seed,
) -> Result<(Solution, StreamStats)>
where
    I: IntoIterator<Item = Item>,
    F: Fn(&Item) -> f64,
{
    let collected = stream_collect(stream, budget, score_fn)?;
    let mut evaluator =
        MonteCarloEvaluator::new(&collected.buffered, g, eval_reps, seed, Purpose::Evaluation);
    stream_finish(&collected, &mut evaluator)
}

/// `streaming_tsg` with exact final comparison, for oracle-grade tests.
pub fn streaming_tsg_exact<I, F>(
    stream: I,
    budget: f64,
    g: &ValueFunction,
    score_fn: F,
    cap: u64,
) -> Result<(Solution, StreamStats)>
where
    I: IntoIterator<Item = Item>,
    F: Fn(&Item) -> f64,
{
    let collected = stream_collect(stream, budget, score_fn)?;
    let mut evaluator = ExactEvaluator::new(&collected.buffered, g, cap);
    stream_finish(&collected, &mut evaluator)
}

/// End-of-stream state: the buffered items (as a mini ground set usable for
/// evaluation) plus the run statistics.
struct StreamState {
    /// Buffer in score-descending order, repackaged as an instance.
    buffered: Instance,
    /// Buffer ids in score-descending order.
    ranked_ids: Vec<u64>,
    stats_updates: usize,
    stats_peak: usize,
}

fn stream_collect<I, F>(stream: I, budget: f64, score_fn: F) -> Result<StreamState>
where
    I: IntoIterator<Item = Item>,
    F: Fn(&Item) -> f64,
{
    let mut buffer: Vec<Buffered> = Vec::new();
    let mut buffer_cost = 0.0;
    let mut seen: HashSet<u64> = HashSet::new();
    let mut updates = 0usize;
    let mut peak = 0usize;

    for item in stream {
        updates += 1;
        if !seen.insert(item.id) {
            return Err(Error::Protocol(format!("item {} arrived twice", item.id)));
        }
        if item.cost > budget {
            return Err(Error::InfeasibleItem { id: item.id, cost: item.cost, budget });
        }
        let score = score_fn(&item);
        if buffer_cost <= budget {
            buffer_cost += item.cost;
            buffer.push(Buffered { item, score });
        } else {
            let weakest = buffer.last().expect("over-budget buffer is nonempty");
            let beats_stored = score > weakest.score;
            if beats_stored {
                buffer_cost += item.cost;
                buffer.push(Buffered { item, score });
            }
        }
        buffer.sort_by(|a, b| {
            b.score.total_cmp(&a.score).then_with(|| a.item.id.cmp(&b.item.id))
        });
        peak = peak.max(buffer.len());
        // Prune to the shortest ranked prefix whose cost exceeds the budget.
        if buffer_cost > budget {
            let mut cum = 0.0;
            let mut keep = buffer.len();
            for (i, b) in buffer.iter().enumerate() {
                cum += b.item.cost;
                if cum > budget {
                    keep = i + 1;
                    break;
                }
            }
            buffer.truncate(keep);
            buffer_cost = buffer.iter().map(|b| b.item.cost).sum();
        }
    }

    if buffer.is_empty() {
        return Err(Error::Domain("empty stream".into()));
    }

    let ranked_ids: Vec<u64> = buffer.iter().map(|b| b.item.id).collect();
    let buffered = Instance::new(buffer.iter().map(|b| b.item.clone()).collect(), budget)?;
    Ok(StreamState { buffered, ranked_ids, stats_updates: updates, stats_peak: peak })
}

fn stream_finish(
    state: &StreamState,
    evaluator: &mut dyn SetEvaluator,
) -> Result<(Solution, StreamStats)> {
    let budget = state.buffered.budget();
    let weakest_id = *state.ranked_ids.last().expect("nonempty buffer");
    let single_ids = vec![weakest_id];
    let single_cost = state.buffered.item(weakest_id)?.cost;
    let mut rest_ids: Vec<u64> =
        state.ranked_ids[..state.ranked_ids.len() - 1].to_vec();
    rest_ids.sort_unstable();
    let rest_cost = state.buffered.total_cost(&rest_ids)?;

    let (rest_est, rest_se) = evaluator.evaluate_set(&rest_ids)?;
    let (single_est, single_se) = evaluator.evaluate_set(&single_ids)?;

    let candidates = vec![
        Candidate { ids: rest_ids.clone(), cost: rest_cost, estimate: rest_est, stderr: rest_se },
        Candidate {
            ids: single_ids.clone(),
            cost: single_cost,
            estimate: single_est,
            stderr: single_se,
        },
    ];
    let solution = if single_est > rest_est {
        Solution {
            selected: single_ids,
            total_cost: single_cost,
            utility_estimate: single_est,
            utility_stderr: single_se,
            winner: Winner::Singleton,
            candidates,
        }
    } else {
        Solution {
            selected: rest_ids,
            total_cost: rest_cost,
            utility_estimate: rest_est,
            utility_stderr: rest_se,
            winner: Winner::SStar,
            candidates,
        }
    };
    debug_assert!(solution.total_cost <= budget * (1.0 + 1e-9));
    let stats = StreamStats {
        peak_buffer_items: state.stats_peak,
        updates: state.stats_updates,
        final_buffer: state.ranked_ids.clone(),
    };
    Ok((solution, stats))
}

/// Estimates marginal gains for the lazy greedy passes.
trait GainOracle {
    fn gain(&mut self, base: &[u64], candidate: u64) -> Result<f64>;
    fn value(&mut self, ids: &[u64]) -> Result<(f64, f64)>;
}

/// Fresh joint realizations per gain evaluation, from streams dedicated to
/// the pass; the base set and the candidate share draws within one call so
/// the difference is taken realization by realization.
struct McGain<'a> {
    instance: &'a Instance,
    g: &'a ValueFunction,
    reps: usize,
    seed: Seed,
    pass: u64,
    calls: u64,
}

impl GainOracle for McGain<'_> {
    fn gain(&mut self, base: &[u64], candidate: u64) -> Result<f64> {
        self.calls += 1;
        let mut ids: Vec<u64> = base.to_vec();
        ids.push(candidate);
        let draws: Vec<Vec<f64>> = ids
            .iter()
            .map(|&id| {
                let item = self.instance.item(id)?;
                let mut rng = self.seed.stream(Purpose::CelfGain, &[self.pass, self.calls, id]);
                Ok(item.dist.sample_values(self.reps, &mut rng))
            })
            .collect::<Result<_>>()?;
        let mut with_cand = vec![0.0; ids.len()];
        let mut total = 0.0;
        for rep in 0..self.reps {
            for (j, col) in draws.iter().enumerate() {
                with_cand[j] = col[rep];
            }
            total += self.g.eval(&with_cand) - self.g.eval(&with_cand[..base.len()]);
        }
        Ok(total / self.reps as f64)
    }

    fn value(&mut self, ids: &[u64]) -> Result<(f64, f64)> {
        self.calls += 1;
        let mut eval = MonteCarloEvaluator::new(
            self.instance,
            self.g,
            self.reps,
            self.seed.derive(self.calls),
            Purpose::CelfCompare,
        );
        eval.evaluate_set(ids)
    }
}

/// Exact marginal gains by finite-support enumeration.
struct ExactGain<'a> {
    instance: &'a Instance,
    g: &'a ValueFunction,
    cap: u64,
}

impl GainOracle for ExactGain<'_> {
    fn gain(&mut self, base: &[u64], candidate: u64) -> Result<f64> {
        let mut ids = base.to_vec();
        ids.push(candidate);
        let with_cand = exact_utility(self.instance, self.g, &ids, self.cap)?;
        let without = exact_utility(self.instance, self.g, base, self.cap)?;
        Ok(with_cand - without)
    }

    fn value(&mut self, ids: &[u64]) -> Result<(f64, f64)> {
        Ok((exact_utility(self.instance, self.g, ids, self.cap)?, 0.0))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PassKind {
    Benefit,
    Density,
}

struct QueueEntry {
    key: f64,
    round: usize,
    id: u64,
    cost: f64,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    // Max-heap priority: higher key, then cheaper, then lower id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.cost.total_cmp(&self.cost))
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn lazy_greedy_pass(
    instance: &Instance,
    oracle: &mut dyn GainOracle,
    kind: PassKind,
) -> Result<Vec<u64>> {
    let budget = instance.budget();
    let keyed = |gain: f64, cost: f64| match kind {
        PassKind::Benefit => gain,
        PassKind::Density => gain / cost,
    };
    let mut selected: Vec<u64> = Vec::new();
    let mut spent = 0.0;
    let mut heap: BinaryHeap<QueueEntry> = BinaryHeap::new();
    for item in instance.items() {
        let gain = oracle.gain(&selected, item.id)?;
        heap.push(QueueEntry { key: keyed(gain, item.cost), round: 0, id: item.id, cost: item.cost });
    }
    while let Some(top) = heap.pop() {
        if spent + top.cost > budget {
            // Can never fit again; the remaining budget only shrinks.
            continue;
        }
        if top.round == selected.len() {
            selected.push(top.id);
            spent += top.cost;
        } else {
            let gain = oracle.gain(&selected, top.id)?;
            heap.push(QueueEntry {
                key: keyed(gain, top.cost),
                round: selected.len(),
                id: top.id,
                cost: top.cost,
            });
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

fn celf_core<'a>(
    instance: &Instance,
    mut make_oracle: impl FnMut(u64) -> Box<dyn GainOracle + 'a>,
) -> Result<Solution> {
    if instance.is_empty() {
        return Err(Error::Domain("cannot solve an empty instance".into()));
    }
    let mut benefit_oracle = make_oracle(0);
    let benefit = lazy_greedy_pass(instance, benefit_oracle.as_mut(), PassKind::Benefit)?;
    let mut density_oracle = make_oracle(1);
    let density = lazy_greedy_pass(instance, density_oracle.as_mut(), PassKind::Density)?;

    let mut compare_oracle = make_oracle(2);
    let (benefit_est, benefit_se) = compare_oracle.value(&benefit)?;
    let (density_est, density_se) = compare_oracle.value(&density)?;
    let benefit_cost = instance.total_cost(&benefit)?;
    let density_cost = instance.total_cost(&density)?;

    let candidates = vec![
        Candidate { ids: benefit.clone(), cost: benefit_cost, estimate: benefit_est, stderr: benefit_se },
        Candidate { ids: density.clone(), cost: density_cost, estimate: density_est, stderr: density_se },
    ];
    let solution = if density_est > benefit_est {
        Solution {
            selected: density,
            total_cost: density_cost,
            utility_estimate: density_est,
            utility_stderr: density_se,
            winner: Winner::Celf,
            candidates,
        }
    } else {
        Solution {
            selected: benefit,
            total_cost: benefit_cost,
            utility_estimate: benefit_est,
            utility_stderr: benefit_se,
            winner: Winner::Celf,
            candidates,
        }
    };
    debug_assert!(solution.total_cost <= instance.budget() * (1.0 + 1e-9));
    Ok(solution)
}

/// Lazy value-oracle greedy benchmark: runs a largest-gain pass and a
/// largest-gain-per-cost pass, each with lazy re-evaluation, and returns the
/// better of the two by a final sampled comparison. Every marginal estimate
/// uses `n_eval` fresh joint realizations from streams dedicated to the pass.
pub fn celf(instance: &Instance, g: &ValueFunction, n_eval: usize, seed: Seed) -> Result<Solution> {
    if n_eval < 1 {
        return Err(Error::InvalidParameter("n_eval must be at least 1".into()));
    }
    g.validate()?;
    celf_core(instance, |pass| {
        Box::new(McGain { instance, g, reps: n_eval, seed, pass, calls: 0 })
    })
}

/// The benchmark with exact marginal gains and exact comparisons, for
/// oracle-grade tests on finite-support instances.
pub fn celf_exact(instance: &Instance, g: &ValueFunction, cap: u64) -> Result<Solution> {
    g.validate()?;
    celf_core(instance, |_pass| Box::new(ExactGain { instance, g, cap }))
}

/// Exhaustive oracle: enumerates all subsets of up to 20 items, computes
/// exact utilities over the joint finite support, and returns the best
/// feasible set (ties to the lexicographically smallest id set).
pub fn brute_force(instance: &Instance, g: &ValueFunction, cap: u64) -> Result<Solution> {
    if instance.is_empty() {
        return Err(Error::Domain("cannot solve an empty instance".into()));
    }
    if instance.len() > 20 {
        return Err(Error::Domain(format!(
            "brute force caps at 20 items, instance has {}",
            instance.len()
        )));
    }
    g.validate()?;
    let items = instance.items();
    let n = items.len();
    let budget = instance.budget();
    let mut best: Option<(f64, Vec<u64>, f64)> = None;
    for mask in 0u32..(1u32 << n) {
        let mut cost = 0.0;
        let mut ids = Vec::new();
        for (i, item) in items.iter().enumerate() {
            if mask & (1 << i) != 0 {
                cost += item.cost;
                ids.push(item.id);
            }
        }
        if cost > budget {
            continue;
        }
        ids.sort_unstable();
        let u = exact_utility(instance, g, &ids, cap)?;
        let better = match &best {
            None => true,
            Some((best_u, best_ids, _)) => {
                u > *best_u || (u == *best_u && ids.as_slice() < best_ids.as_slice())
            }
        };
        if better {
            best = Some((u, ids, cost));
        }
    }
    let (best_u, best_ids, best_cost) = best.expect("the empty set is always feasible");
    Ok(Solution {
        selected: best_ids,
        total_cost: best_cost,
        utility_estimate: best_u,
        utility_stderr: 0.0,
        winner: Winner::Exact,
        candidates: vec![],
    })
}

/// Post-hoc ranking-error diagnostic: the smallest eps >= 0 such that every
/// true score among the estimated top k+1 items is at least (1 - eps) times
/// the best true score outside the estimated top k. Zero when the estimated
/// ranking's top set dominates.
pub fn epsilon_diagnostic(
    instance: &Instance,
    scores: &ScoreTable,
    true_score: &dyn Fn(u64) -> f64,
) -> Result<f64> {
    let ranked = ranked_items(instance, scores)?;
    let budget = instance.budget();
    let mut cum = 0.0;
    let mut cut = 0;
    for item in &ranked {
        if cum + item.cost <= budget {
            cum += item.cost;
            cut += 1;
        } else {
            break;
        }
    }
    if cut == ranked.len() {
        return Ok(0.0);
    }
    let min_top = ranked[..=cut]
        .iter()
        .map(|r| true_score(r.id))
        .fold(f64::INFINITY, f64::min);
    let max_rest = ranked[cut..]
        .iter()
        .map(|r| true_score(r.id))
        .fold(f64::NEG_INFINITY, f64::max);
    if max_rest <= 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - min_top / max_rest).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Instance, Item, ValueDistribution};
    use crate::scores::{estimate_scores, exact_score, exact_score_table, DEFAULT_ENUM_CAP};

    fn det(v: f64) -> ValueDistribution {
        ValueDistribution::Deterministic { value: v }
    }

    fn bern(mean: f64) -> ValueDistribution {
        ValueDistribution::Bernoulli { mean }
    }

    fn two_item_trap() -> Instance {
        // Ranked by score the cheap low-value item comes first; the greedy
        // prefix alone would return value 1 while the optimum is 11.
        Instance::new(
            vec![
                Item::new(1, 12.0, det(11.0)).unwrap(),
                Item::new(2, 1.0, det(1.0)).unwrap(),
            ],
            12.0,
        )
        .unwrap()
    }

    #[test]
    fn tsg_escapes_prefix_trap() {
        let inst = two_item_trap();
        let g = ValueFunction::Modular;
        let table = exact_score_table(&inst, &g, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(table.get(1).unwrap().r_hat, 11.0);
        assert_eq!(table.get(2).unwrap().r_hat, 12.0);
        let mut ev = ExactEvaluator::new(&inst, &g, DEFAULT_ENUM_CAP);
        let sol = tsg_with(&inst, &table, &mut ev).unwrap();
        assert_eq!(sol.selected, vec![1]);
        assert_eq!(sol.utility_estimate, 11.0);
        assert_eq!(sol.winner, Winner::SStarStar);
        // The prefix candidate carries its own (poor) value for diagnostics.
        assert_eq!(sol.candidates[0].ids, vec![2]);
        assert_eq!(sol.candidates[0].estimate, 1.0);
    }

    #[test]
    fn tsg_breaks_ties_by_id() {
        let items: Vec<Item> = (1..=10).map(|i| Item::new(i, 1.0, det(1.0)).unwrap()).collect();
        let inst = Instance::new(items, 5.0).unwrap();
        let g = ValueFunction::Modular;
        let table = exact_score_table(&inst, &g, DEFAULT_ENUM_CAP).unwrap();
        let mut ev = ExactEvaluator::new(&inst, &g, DEFAULT_ENUM_CAP);
        let sol = tsg_with(&inst, &table, &mut ev).unwrap();
        assert_eq!(sol.selected, vec![1, 2, 3, 4, 5]);
        assert_eq!(sol.utility_estimate, 5.0);
        assert_eq!(sol.winner, Winner::SStar);
    }

    #[test]
    fn tsg_all_items_fit() {
        let items: Vec<Item> = (1..=3).map(|i| Item::new(i, 1.0, det(1.0)).unwrap()).collect();
        let inst = Instance::new(items, 10.0).unwrap();
        let g = ValueFunction::Modular;
        let table = exact_score_table(&inst, &g, DEFAULT_ENUM_CAP).unwrap();
        let mut ev = ExactEvaluator::new(&inst, &g, DEFAULT_ENUM_CAP);
        let sol = tsg_with(&inst, &table, &mut ev).unwrap();
        assert_eq!(sol.selected, vec![1, 2, 3]);
        assert_eq!(sol.candidates.len(), 1);
    }

    #[test]
    fn tsg_candidate_containment() {
        // The prefix candidate contains the cut prefix; the second candidate
        // contains the first rejected item.
        let mut rng = Seed(5).stream(Purpose::Fuzz, &[]);
        for trial in 0..50 {
            let n = 4 + rng.index(5);
            let items: Vec<Item> = (0..n)
                .map(|i| {
                    Item::new(i as u64 + 1, 0.5 + rng.uniform() * 1.5, bern(0.05 + 0.9 * rng.uniform()))
                        .unwrap()
                })
                .collect();
            let budget = 1.9 + rng.uniform() * 2.0;
            let items: Vec<Item> = items.into_iter().filter(|it| it.cost <= budget).collect();
            if items.len() < 3 {
                continue;
            }
            let inst = Instance::new(items, budget).unwrap();
            let g = ValueFunction::TopR { count: 1 };
            let table = exact_score_table(&inst, &g, DEFAULT_ENUM_CAP).unwrap();
            let ranked = ranked_items(&inst, &table).unwrap();
            let mut cum = 0.0;
            let mut cut = 0;
            for r in &ranked {
                if cum + r.cost <= inst.budget() {
                    cum += r.cost;
                    cut += 1;
                } else {
                    break;
                }
            }
            let mut ev = ExactEvaluator::new(&inst, &g, DEFAULT_ENUM_CAP);
            let sol = tsg_with(&inst, &table, &mut ev).unwrap();
            assert!(sol.total_cost <= inst.budget(), "trial {trial}");
            if sol.candidates.len() == 2 {
                for r in &ranked[..cut] {
                    assert!(sol.candidates[0].ids.contains(&r.id));
                }
                assert!(sol.candidates[1].ids.contains(&ranked[cut].id));
            }
        }
    }

    #[test]
    fn tsg_rejects_empty_and_bad_reps() {
        let inst = two_item_trap();
        let g = ValueFunction::Modular;
        let table = exact_score_table(&inst, &g, DEFAULT_ENUM_CAP).unwrap();
        assert!(tsg(&inst, &table, 0, Seed(1)).is_err());
        // Missing score entry for an instance item is an error.
        let other = Instance::new(vec![Item::new(9, 1.0, det(1.0)).unwrap()], 2.0).unwrap();
        let other_table = exact_score_table(&other, &g, DEFAULT_ENUM_CAP).unwrap();
        let mut ev = ExactEvaluator::new(&inst, &g, DEFAULT_ENUM_CAP);
        assert!(tsg_with(&inst, &other_table, &mut ev).is_err());
        // So is an empty ground set.
        let empty = Instance::new(vec![], 2.0).unwrap();
        let mut ev = ExactEvaluator::new(&empty, &g, DEFAULT_ENUM_CAP);
        assert!(tsg_with(&empty, &other_table, &mut ev).is_err());
    }

    #[test]
    fn tsg_matches_monte_carlo_comparison_determinism() {
        let inst = two_item_trap();
        let g = ValueFunction::Modular;
        let table = estimate_scores(&inst, &g, 100, Seed(3)).unwrap();
        let a = tsg(&inst, &table, 500, Seed(4)).unwrap();
        let b = tsg(&inst, &table, 500, Seed(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn streaming_two_item_trap_both_orders() {
        let inst = two_item_trap();
        let g = ValueFunction::Modular;
        let score = |item: &Item| exact_score(item, &g, 12.0, DEFAULT_ENUM_CAP).unwrap();
        for order in [[0usize, 1], [1, 0]] {
            let stream: Vec<Item> = order.iter().map(|&i| inst.items()[i].clone()).collect();
            let (sol, stats) =
                streaming_tsg_exact(stream, 12.0, &g, score, DEFAULT_ENUM_CAP).unwrap();
            assert_eq!(sol.selected, vec![1], "order {order:?}");
            assert_eq!(sol.utility_estimate, 11.0);
            assert_eq!(stats.updates, 2);
        }
    }

    #[test]
    fn streaming_buffer_stays_within_memory_bound() {
        let g = ValueFunction::Modular;
        let items: Vec<Item> =
            (1..=10).map(|i| Item::new(i, 1.0, det(i as f64 / 10.0)).unwrap()).collect();
        let budget = 5.0;
        let score = |item: &Item| item.dist.mean() * 5.0;
        let (sol, stats) = streaming_tsg_exact(items, budget, &g, score, DEFAULT_ENUM_CAP).unwrap();
        // 2B/c + 1 = 11.
        assert!(stats.peak_buffer_items <= 11, "peak {}", stats.peak_buffer_items);
        assert!(sol.total_cost <= budget);
        // Highest-score prefix wins: items 10..5 buffered, weakest dropped.
        assert_eq!(sol.selected, vec![6, 7, 8, 9, 10]);
    }

    #[test]
    fn streaming_single_item() {
        let g = ValueFunction::Modular;
        let item = Item::new(3, 2.0, det(0.7)).unwrap();
        let (sol, stats) =
            streaming_tsg_exact(vec![item], 10.0, &g, |_| 1.0, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(sol.selected, vec![3]);
        assert_eq!(stats.final_buffer, vec![3]);
        assert_eq!(sol.winner, Winner::Singleton);
    }

    #[test]
    fn streaming_rejects_duplicates() {
        let g = ValueFunction::Modular;
        let a = Item::new(1, 1.0, det(1.0)).unwrap();
        let b = Item::new(1, 2.0, det(2.0)).unwrap();
        let err = streaming_tsg_exact(vec![a, b], 10.0, &g, |_| 1.0, DEFAULT_ENUM_CAP);
        assert!(matches!(err, Err(Error::Protocol(_))));
    }

    #[test]
    fn streaming_prunes_low_scores_stranded_by_early_arrivals() {
        // A cheap low-score item arrives first; once the budget overflows it
        // must not survive inside the buffer and poison feasibility.
        let g = ValueFunction::Modular;
        let junk = Item::new(3, 0.5, det(0.1)).unwrap();
        let a = Item::new(1, 3.0, det(3.0)).unwrap();
        let b = Item::new(2, 3.0, det(2.9)).unwrap();
        let score = |item: &Item| item.dist.mean();
        let (sol, stats) =
            streaming_tsg_exact(vec![junk, a, b], 4.0, &g, score, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(stats.final_buffer, vec![1, 2]);
        assert_eq!(sol.selected, vec![1]);
        assert!(sol.total_cost <= 4.0);
    }

    #[test]
    fn celf_uniform_costs_modular() {
        let values = [5.0, 4.0, 3.0, 2.0];
        let items: Vec<Item> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Item::new(i as u64 + 1, 1.0, det(v)).unwrap())
            .collect();
        let inst = Instance::new(items, 3.0).unwrap();
        let sol = celf_exact(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(sol.selected, vec![1, 2, 3]);
        assert_eq!(sol.utility_estimate, 12.0);
    }

    #[test]
    fn celf_density_pass_beats_stuck_benefit_pass() {
        let items = vec![
            Item::new(1, 3.0, det(3.0)).unwrap(),
            Item::new(2, 2.0, det(2.0)).unwrap(),
            Item::new(3, 2.0, det(2.0)).unwrap(),
        ];
        let inst = Instance::new(items, 4.0).unwrap();
        let sol = celf_exact(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(sol.candidates[0].ids, vec![1]);
        assert_eq!(sol.candidates[0].estimate, 3.0);
        assert_eq!(sol.selected, vec![2, 3]);
        assert_eq!(sol.utility_estimate, 4.0);
    }

    #[test]
    fn celf_monte_carlo_is_deterministic_and_feasible() {
        let items = vec![
            Item::new(1, 2.0, bern(0.8)).unwrap(),
            Item::new(2, 1.0, bern(0.6)).unwrap(),
            Item::new(3, 1.5, bern(0.4)).unwrap(),
        ];
        let inst = Instance::new(items, 3.0).unwrap();
        let g = ValueFunction::TopR { count: 1 };
        let a = celf(&inst, &g, 200, Seed(9)).unwrap();
        let b = celf(&inst, &g, 200, Seed(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.total_cost <= 3.0);
    }

    #[test]
    fn brute_force_small_cases() {
        let items = vec![
            Item::new(1, 3.0, det(3.0)).unwrap(),
            Item::new(2, 2.0, det(2.0)).unwrap(),
            Item::new(3, 2.0, det(2.0)).unwrap(),
        ];
        let inst = Instance::new(items, 4.0).unwrap();
        let sol = brute_force(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(sol.selected, vec![2, 3]);
        assert_eq!(sol.utility_estimate, 4.0);

        let inst = Instance::new(vec![Item::new(7, 2.0, det(1.0)).unwrap()], 2.0).unwrap();
        let sol = brute_force(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(sol.selected, vec![7]);

        // Ties resolve to the lexicographically smallest id set.
        let items = vec![
            Item::new(4, 1.0, det(1.0)).unwrap(),
            Item::new(2, 1.0, det(1.0)).unwrap(),
        ];
        let inst = Instance::new(items, 1.0).unwrap();
        let sol = brute_force(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(sol.selected, vec![2]);
    }

    #[test]
    fn brute_force_empty_when_nothing_fits() {
        // Construction rejects items costing more than the budget, so model
        // "nothing fits" with a pair whose joint cost overflows while each
        // singleton is affordable; the empty set loses to any singleton, so
        // shrink the budget below the cheapest item via a direct call check.
        let items = vec![Item::new(1, 2.0, det(0.0)).unwrap()];
        let inst = Instance::new(items, 2.0).unwrap();
        let sol = brute_force(&inst, &ValueFunction::Modular, DEFAULT_ENUM_CAP).unwrap();
        // Zero-value item ties the empty set; empty set is lexicographically
        // smaller.
        assert_eq!(sol.selected, Vec::<u64>::new());
        assert_eq!(sol.utility_estimate, 0.0);
    }

    #[test]
    fn tsg_meets_constant_factor_on_small_corpus() {
        // Exact scores and exact utilities; the two-candidate output must be
        // within the worst-case constant of the brute-force optimum.
        let bound = {
            let p = 1.0 - (-1.0_f64).exp();
            let q = 1.0 + 1.7 + 2.0 * 1.7_f64.sqrt();
            p / (p + 2.0 * q)
        };
        let g = ValueFunction::Ces { degree: 2.0 };
        let mut rng = Seed(21).stream(Purpose::Fuzz, &[]);
        for _ in 0..40 {
            let n = 5 + rng.index(4);
            let mut items = Vec::new();
            for i in 0..n {
                items.push(
                    Item::new(i as u64, 0.5 + 1.5 * rng.uniform(), bern(0.05 + 0.9 * rng.uniform()))
                        .unwrap(),
                );
            }
            let budget: f64 = items.iter().take(3).map(|i| i.cost).sum();
            let items: Vec<Item> = items.into_iter().filter(|i| i.cost <= budget).collect();
            if items.len() < 2 {
                continue;
            }
            let inst = Instance::new(items, budget).unwrap();
            let table = exact_score_table(&inst, &g, DEFAULT_ENUM_CAP).unwrap();
            let mut ev = ExactEvaluator::new(&inst, &g, DEFAULT_ENUM_CAP);
            let sol = tsg_with(&inst, &table, &mut ev).unwrap();
            let opt = brute_force(&inst, &g, DEFAULT_ENUM_CAP).unwrap();
            assert!(
                sol.utility_estimate >= bound * opt.utility_estimate - 1e-12,
                "ratio {}",
                sol.utility_estimate / opt.utility_estimate
            );
        }
    }

    #[test]
    fn epsilon_diagnostic_cases() {
        let inst = two_item_trap();
        let g = ValueFunction::Modular;
        let exact = exact_score_table(&inst, &g, DEFAULT_ENUM_CAP).unwrap();
        // Exact estimates rank consistently with themselves.
        let eps = epsilon_diagnostic(&inst, &exact, &|id| {
            exact.get(id).unwrap().r_hat
        })
        .unwrap();
        assert_eq!(eps, 0.0);

        // Estimates that reverse two items around the cut with true scores
        // (1.0, 0.9) leave eps = 0.1.
        let items = vec![
            Item::new(1, 6.0, det(1.0)).unwrap(),
            Item::new(2, 6.0, det(1.0)).unwrap(),
        ];
        let inst = Instance::new(items, 10.0).unwrap();
        let entries = vec![
            crate::scores::ScoreEntry { item_id: 1, cost: 6.0, k: 1, m: 1, r_hat: 0.4, stderr: 0.0, degraded: false },
            crate::scores::ScoreEntry { item_id: 2, cost: 6.0, k: 1, m: 1, r_hat: 0.6, stderr: 0.0, degraded: false },
        ];
        let table = ScoreTable::new(entries, 0, "modular".into());
        let truth = |id: u64| if id == 1 { 1.0 } else { 0.9 };
        let eps = epsilon_diagnostic(&inst, &table, &truth).unwrap();
        assert!((eps - 0.1).abs() < 1e-12, "eps {eps}");

        // Equal true scores need no tolerance.
        let eps = epsilon_diagnostic(&inst, &table, &|_| 2.0).unwrap();
        assert_eq!(eps, 0.0);
    }

    #[test]
    fn solution_csv_shape() {
        let inst = two_item_trap();
        let g = ValueFunction::Modular;
        let table = exact_score_table(&inst, &g, DEFAULT_ENUM_CAP).unwrap();
        let mut ev = ExactEvaluator::new(&inst, &g, DEFAULT_ENUM_CAP);
        let sol = tsg_with(&inst, &table, &mut ev).unwrap();
        let row = solution_csv_row("tsg", 7, 2, 12.0, "modular", &sol);
        assert_eq!(row, "tsg,7,2,12.0,modular,1,12.0,11.0,0.0");
    }
}
