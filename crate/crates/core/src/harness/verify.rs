//! Composite verification suite: randomized invariant checks for the sketch
//! quantities, the approximation bounds against the exact oracle, streaming
//! agreement, and empirical sample-size coverage. The acceptance test suite
//! runs these same checks at pinned sizes; the CLI exposes them as one
//! command.

use rayon::prelude::*;

use crate::instance::{Instance, Item, ValueDistribution};
use crate::rng::{Purpose, Seed, StreamRng};
use crate::samples::{gap_samples, hoeffding_samples, mcdiarmid_samples, AccuracySpec};
use crate::scores::{
    estimate_scores, exact_score, exact_score_table, exact_utility, relative_cost,
    verify_sandwich, DEFAULT_ENUM_CAP,
};
use crate::solvers::{
    brute_force, celf_exact, streaming_tsg_exact, tsg_with, ExactEvaluator,
};
use crate::value_fn::{SuccessFn, ValueFunction};

/// One named check with a human-readable detail line.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, pass: bool, detail: String) -> CheckResult {
        CheckResult { name: name.to_string(), pass, detail }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Worst-case factor of the two-candidate greedy with no ranking error.
pub fn general_bound() -> f64 {
    let p = 1.0 - (-1.0_f64).exp();
    let q = 1.0 + 1.7 + 2.0 * 1.7_f64.sqrt();
    p / (p + 2.0 * q)
}

/// Uniform-cost factor with no ranking error.
pub fn uniform_cost_bound() -> f64 {
    let e = (-1.0_f64).exp();
    (1.0 - e) / (5.0 - e)
}

/// Modular (zero-curvature) factor with no ranking error.
pub fn modular_bound() -> f64 {
    5.0 / 17.0
}

/// Value-oracle benchmark factor.
pub fn celf_bound() -> f64 {
    (1.0 - (-1.0_f64).exp()) / 2.0
}

/// Extended-diminishing-returns variants exercised by the randomized suites.
pub fn dr_variants() -> Vec<ValueFunction> {
    vec![
        ValueFunction::Modular,
        ValueFunction::Power { exponent: 0.5 },
        ValueFunction::Saturating { price: 1.0, saturation: 1.0 },
        ValueFunction::TopR { count: 1 },
        ValueFunction::TopR { count: 2 },
        ValueFunction::Ces { degree: 2.0 },
        ValueFunction::SuccessProbability { pfn: SuccessFn::ExpSaturating },
    ]
}

/// Random finite-support instance with up to 10 items and a budget sized so
/// roughly 2..6 items fit. Bernoulli and deterministic values keep every
/// exact-oracle path cheap.
pub fn random_small_instance(rng: &mut StreamRng, uniform_costs: bool) -> Instance {
    loop {
        let n = 4 + rng.index(7); // 4..=10
        let costs: Vec<f64> = (0..n)
            .map(|_| if uniform_costs { 1.0 } else { 0.4 + 1.6 * rng.uniform() })
            .collect();
        let fit_target = 2 + rng.index(5); // 2..=6
        let budget = if uniform_costs {
            fit_target as f64
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            let prefix: f64 = order.iter().take(fit_target).map(|&i| costs[i]).sum();
            let max_cost = costs.iter().fold(0.0_f64, |a, &b| a.max(b));
            let min_cost = costs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            // At least two items always fit; pad away the exact-fit corner
            // so reordered cost summation cannot flip feasibility by an ulp.
            prefix.max(max_cost + min_cost) * (1.0 + 1e-9)
        };
        let items: Vec<Item> = costs
            .iter()
            .enumerate()
            .map(|(i, &cost)| {
                let dist = if rng.uniform() < 0.5 {
                    ValueDistribution::Bernoulli { mean: 0.05 + 0.9 * rng.uniform() }
                } else {
                    ValueDistribution::Deterministic { value: 0.05 + 0.95 * rng.uniform() }
                };
                Item::new(i as u64 + 1, cost, dist).expect("valid item")
            })
            .collect();
        if let Ok(instance) = Instance::new(items, budget) {
            if instance.len() >= 2 {
                return instance;
            }
        }
    }
}

/// Nonempty random feasible subset of an instance.
pub fn random_feasible_set(instance: &Instance, rng: &mut StreamRng) -> Vec<u64> {
    loop {
        let mut order: Vec<usize> = (0..instance.len()).collect();
        rng.shuffle(&mut order);
        let mut ids = Vec::new();
        let mut cost = 0.0;
        let stop = 1 + rng.index(instance.len());
        for &i in order.iter().take(stop) {
            let item = &instance.items()[i];
            if cost + item.cost <= instance.budget() {
                cost += item.cost;
                ids.push(item.id);
            }
        }
        if !ids.is_empty() {
            ids.sort_unstable();
            return ids;
        }
    }
}

/// Relative-cost cap: d(S) <= 1.7 for every feasible set, fuzzed over random
/// cost profiles, plus a constructed near-worst-case profile that pushes d
/// close to the cap.
pub fn check_relative_cost_cap(profiles: usize, sets_per_profile: usize, seed: Seed) -> CheckResult {
    let name = "relative-cost-cap";
    if profiles == 0 || sets_per_profile == 0 {
        return CheckResult::new(name, true, "vacuous: empty corpus".into());
    }
    let mut worst: f64 = 0.0;
    for p in 0..profiles {
        let mut rng = seed.stream(Purpose::Fuzz, &[1, p as u64]);
        let n = 3 + rng.index(10);
        let budget = 1.0 + 9.0 * rng.uniform();
        let items: Vec<Item> = (0..n)
            .map(|i| {
                // Mix tiny and large costs to stress the cap.
                let frac = match rng.index(3) {
                    0 => 0.5 + 0.5 * rng.uniform(),
                    1 => 0.2 + 0.3 * rng.uniform(),
                    _ => 0.01 + 0.19 * rng.uniform(),
                };
                Item::new(i as u64 + 1, frac * budget, ValueDistribution::Deterministic {
                    value: 1.0,
                })
                .expect("valid item")
            })
            .collect();
        let instance = match Instance::new(items, budget) {
            Ok(inst) => inst,
            Err(_) => continue,
        };
        for _ in 0..sets_per_profile {
            let ids = random_feasible_set(&instance, &mut rng);
            let d = relative_cost(&instance, &ids).expect("known ids");
            worst = worst.max(d);
            if d > 1.7 {
                return CheckResult::new(
                    name,
                    false,
                    format!("d(S) = {d} > 1.7 on profile {p}, set {ids:?}"),
                );
            }
        }
    }

    // Near-worst case: replication counts 1, 2, 6, 42 under budget 1.
    let items = vec![
        Item::new(1, 0.5000001, ValueDistribution::Deterministic { value: 1.0 }).unwrap(),
        Item::new(2, 0.3333334, ValueDistribution::Deterministic { value: 1.0 }).unwrap(),
        Item::new(3, 0.1428572, ValueDistribution::Deterministic { value: 1.0 }).unwrap(),
        Item::new(4, 0.0232559, ValueDistribution::Deterministic { value: 1.0 }).unwrap(),
    ];
    let instance = Instance::new(items, 1.0).expect("feasible profile");
    let total: f64 = instance.items().iter().map(|i| i.cost).sum();
    assert!(total <= 1.0);
    let d = relative_cost(&instance, &[1, 2, 3, 4]).unwrap();
    let floor = 61.0 / 36.0 - 0.01;
    if d < floor || d > 1.7 {
        return CheckResult::new(
            name,
            false,
            format!("constructed profile reached d = {d}, wanted [{floor}, 1.7]"),
        );
    }
    CheckResult::new(
        name,
        true,
        format!("worst fuzzed d = {worst:.4}, constructed d = {d:.6} within (61/36 - 0.01, 1.7]"),
    )
}

/// Cost-regularity bound: for beta-small or beta-regular costs and maximal
/// feasible sets, 1 - beta/(1-beta) <= d(S) <= 1 + beta/(1-beta).
pub fn check_cost_regularity(cases: usize, seed: Seed) -> CheckResult {
    let name = "cost-regularity-bounds";
    if cases == 0 {
        return CheckResult::new(name, true, "vacuous: empty corpus".into());
    }
    for case in 0..cases {
        let mut rng = seed.stream(Purpose::Fuzz, &[2, case as u64]);
        let beta = 0.05 + 0.35 * rng.uniform(); // within (0, 0.4]
        let budget = 10.0;
        let beta_small = rng.uniform() < 0.5;
        let n = 4 + rng.index(10);
        // One base replication count per case keeps all k_i within the
        // 1 - beta factor the regular condition demands.
        let k0 = 2 + rng.index(6) as u64;
        let k_hi = ((k0 as f64) / (1.0 - beta)).floor() as u64;
        let items: Vec<Item> = (0..n)
            .map(|i| {
                let cost = if beta_small {
                    // Every cost at most beta * budget.
                    beta * budget * (0.2 + 0.8 * rng.uniform())
                } else {
                    let k = k0 + (rng.index((k_hi - k0 + 1) as usize) as u64);
                    // cost in (budget/(k+1), budget/k].
                    let lo = budget / (k as f64 + 1.0);
                    let hi = budget / k as f64;
                    lo + (hi - lo) * (0.5 + 0.5 * rng.uniform())
                };
                Item::new(i as u64 + 1, cost, ValueDistribution::Deterministic { value: 1.0 })
                    .expect("valid item")
            })
            .collect();
        let instance = match Instance::new(items, budget) {
            Ok(inst) => inst,
            Err(_) => continue,
        };
        // Maximal feasible set: greedy fill in shuffled order.
        let mut order: Vec<usize> = (0..instance.len()).collect();
        rng.shuffle(&mut order);
        let mut ids = Vec::new();
        let mut cost = 0.0;
        for &i in &order {
            let item = &instance.items()[i];
            if cost + item.cost <= budget {
                cost += item.cost;
                ids.push(item.id);
            }
        }
        // The bound needs a genuinely maximal proper subset: at least one
        // item must be priced out. When everything fits the premise is
        // vacuous.
        if ids.len() == instance.len() || ids.is_empty() {
            continue;
        }
        let maximal = instance
            .items()
            .iter()
            .filter(|it| !ids.contains(&it.id))
            .all(|it| cost + it.cost > budget);
        if !maximal {
            continue;
        }
        let d = relative_cost(&instance, &ids).unwrap();
        let slack = beta / (1.0 - beta);
        if d < 1.0 - slack - 1e-9 || d > 1.0 + slack + 1e-9 {
            return CheckResult::new(
                name,
                false,
                format!(
                    "case {case}: beta {beta:.3} ({}), d = {d:.4} outside [{:.4}, {:.4}]",
                    if beta_small { "small" } else { "regular" },
                    1.0 - slack,
                    1.0 + slack
                ),
            );
        }
    }
    CheckResult::new(name, true, format!("{cases} maximal sets within the beta bounds"))
}

/// Sketch sandwich on random (instance, variant, set) triples. `q_scale`
/// rescales the upper factor and exists so the suite can prove it would
/// catch a broken bound; 1.0 is the real check.
pub fn check_sketch_sandwich_scaled(
    triples_per_variant: usize,
    mc_reps: usize,
    seed: Seed,
    q_scale: f64,
) -> CheckResult {
    let name = "sketch-sandwich";
    if triples_per_variant == 0 {
        return CheckResult::new(name, true, "vacuous: empty corpus".into());
    }
    let variants = dr_variants();
    let failures: Vec<String> = variants
        .par_iter()
        .enumerate()
        .flat_map(|(vi, g)| {
            (0..triples_per_variant)
                .into_par_iter()
                .filter_map(|t| {
                    let mut rng = seed.stream(Purpose::Fuzz, &[3, vi as u64, t as u64]);
                    let instance = random_small_instance(&mut rng, false);
                    let ids = random_feasible_set(&instance, &mut rng);
                    let sub = seed.derive((vi * 1_000_000 + t) as u64);
                    match verify_sandwich(&instance, g, &ids, mc_reps, sub) {
                        Ok(report) => {
                            let pass = report.lower - 3.0 * report.stderr <= report.u_hat
                                && report.u_hat <= q_scale * report.upper + 3.0 * report.stderr;
                            if pass {
                                None
                            } else {
                                Some(format!(
                                    "{}: triple {t} failed ({report:?})",
                                    g.tag()
                                ))
                            }
                        }
                        Err(e) => Some(format!("{}: triple {t} errored: {e}", g.tag())),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    if failures.is_empty() {
        CheckResult::new(
            name,
            true,
            format!("{} variants x {triples_per_variant} triples hold", variants.len()),
        )
    } else {
        CheckResult::new(name, false, failures.join("; "))
    }
}

pub fn check_sketch_sandwich(triples_per_variant: usize, mc_reps: usize, seed: Seed) -> CheckResult {
    check_sketch_sandwich_scaled(triples_per_variant, mc_reps, seed, 1.0)
}

/// Worst observed ratio of the greedy's exact value to the brute-force
/// optimum over a random corpus, together with the count checked.
pub struct RatioOutcome {
    pub checked: usize,
    pub worst_ratio: f64,
    pub failures: Vec<String>,
}

/// Exact-score, exact-utility approximation check against a bound.
fn tsg_ratio_corpus(
    instances: usize,
    seed: Seed,
    salt: u64,
    uniform_costs: bool,
    variants: &[ValueFunction],
    bound: f64,
) -> RatioOutcome {
    let results: Vec<(f64, Option<String>)> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(Purpose::Fuzz, &[salt, i as u64]);
            let g = &variants[i % variants.len()];
            let instance = random_small_instance(&mut rng, uniform_costs);
            let table = exact_score_table(&instance, g, DEFAULT_ENUM_CAP).expect("finite support");
            let mut evaluator = ExactEvaluator::new(&instance, g, DEFAULT_ENUM_CAP);
            let sol = tsg_with(&instance, &table, &mut evaluator).expect("solvable");
            let opt = brute_force(&instance, g, DEFAULT_ENUM_CAP).expect("solvable");
            if opt.utility_estimate <= 0.0 {
                return (1.0, None);
            }
            let ratio = sol.utility_estimate / opt.utility_estimate;
            let failure = if ratio < bound {
                Some(format!(
                    "instance {i} ({}): ratio {ratio:.5} < bound {bound:.5}",
                    g.tag()
                ))
            } else {
                None
            };
            (ratio, failure)
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for (ratio, failure) in results {
        worst = worst.min(ratio);
        if let Some(f) = failure {
            failures.push(f);
        }
    }
    RatioOutcome { checked: instances, worst_ratio: worst, failures }
}

pub fn check_tsg_general_bound(instances: usize, seed: Seed) -> CheckResult {
    let name = "tsg-general-bound";
    if instances == 0 {
        return CheckResult::new(name, true, "vacuous: empty corpus".into());
    }
    let outcome = tsg_ratio_corpus(instances, seed, 10, false, &dr_variants(), general_bound());
    describe_ratio(name, outcome, general_bound())
}

pub fn check_tsg_modular_bound(instances: usize, seed: Seed) -> CheckResult {
    let name = "tsg-modular-bound";
    if instances == 0 {
        return CheckResult::new(name, true, "vacuous: empty corpus".into());
    }
    let outcome =
        tsg_ratio_corpus(instances, seed, 11, false, &[ValueFunction::Modular], modular_bound());
    describe_ratio(name, outcome, modular_bound())
}

pub fn check_tsg_uniform_cost_bound(instances: usize, seed: Seed) -> CheckResult {
    let name = "tsg-uniform-cost-bound";
    if instances == 0 {
        return CheckResult::new(name, true, "vacuous: empty corpus".into());
    }
    let outcome = tsg_ratio_corpus(instances, seed, 12, true, &dr_variants(), uniform_cost_bound());
    describe_ratio(name, outcome, uniform_cost_bound())
}

pub fn check_celf_bound(instances: usize, seed: Seed) -> CheckResult {
    let name = "celf-bound";
    if instances == 0 {
        return CheckResult::new(name, true, "vacuous: empty corpus".into());
    }
    let bound = celf_bound();
    let variants = dr_variants();
    let results: Vec<(f64, Option<String>)> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(Purpose::Fuzz, &[13, i as u64]);
            let g = &variants[i % variants.len()];
            let instance = random_small_instance(&mut rng, false);
            let sol = celf_exact(&instance, g, DEFAULT_ENUM_CAP).expect("solvable");
            let opt = brute_force(&instance, g, DEFAULT_ENUM_CAP).expect("solvable");
            if opt.utility_estimate <= 0.0 {
                return (1.0, None);
            }
            let ratio = sol.utility_estimate / opt.utility_estimate;
            let failure = (ratio < bound).then(|| {
                format!("instance {i} ({}): ratio {ratio:.5} < bound {bound:.5}", g.tag())
            });
            (ratio, failure)
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for (ratio, failure) in results {
        worst = worst.min(ratio);
        if let Some(f) = failure {
            failures.push(f);
        }
    }
    describe_ratio(name, RatioOutcome { checked: instances, worst_ratio: worst, failures }, bound)
}

fn describe_ratio(name: &str, outcome: RatioOutcome, bound: f64) -> CheckResult {
    if outcome.failures.is_empty() {
        CheckResult::new(
            name,
            true,
            format!(
                "{} instances, worst ratio {:.4} >= bound {:.5}",
                outcome.checked, outcome.worst_ratio, bound
            ),
        )
    } else {
        CheckResult::new(name, false, outcome.failures.join("; "))
    }
}

/// Streaming/batch agreement under distinct exact scores: the final buffer
/// is the top-scored prefix that first exceeds the budget, the streaming
/// candidate pair is exactly (prefix, first-rejected singleton), its
/// better-of value matches the batch pair, the batch output dominates it,
/// and the buffer respects the memory bound.
pub fn check_streaming_agreement(instances: usize, orders: usize, seed: Seed) -> CheckResult {
    let name = "streaming-agreement";
    if instances == 0 || orders == 0 {
        return CheckResult::new(name, true, "vacuous: empty corpus".into());
    }
    let g = ValueFunction::TopR { count: 1 };
    let failures: Vec<String> = (0..instances)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = seed.stream(Purpose::Fuzz, &[14, i as u64]);
            // Distinct scores and a stream whose total cost overflows the
            // budget; regenerate until both hold.
            let (instance, table) = loop {
                let candidate = random_small_instance(&mut rng, false);
                let total: f64 = candidate.items().iter().map(|it| it.cost).sum();
                if total <= candidate.budget() {
                    continue;
                }
                let table =
                    exact_score_table(&candidate, &g, DEFAULT_ENUM_CAP).expect("finite support");
                let mut scores: Vec<f64> = table.entries().iter().map(|e| e.r_hat).collect();
                scores.sort_by(|a, b| a.total_cmp(b));
                let distinct = scores.windows(2).all(|w| (w[1] - w[0]).abs() > 1e-9);
                if distinct {
                    break (candidate, table);
                }
            };
            // Batch ranking and the pair it implies.
            let mut ranked: Vec<&Item> = instance.items().iter().collect();
            ranked.sort_by(|a, b| {
                let ra = table.get(a.id).unwrap().r_hat;
                let rb = table.get(b.id).unwrap().r_hat;
                rb.total_cmp(&ra).then_with(|| a.id.cmp(&b.id))
            });
            let mut cum = 0.0;
            let mut cut = 0;
            for item in &ranked {
                if cum + item.cost <= instance.budget() {
                    cum += item.cost;
                    cut += 1;
                } else {
                    break;
                }
            }
            assert!(cut < ranked.len());
            let mut prefix_ids: Vec<u64> = ranked[..cut].iter().map(|it| it.id).collect();
            prefix_ids.sort_unstable();
            let rejected = ranked[cut].id;
            let u_prefix =
                exact_utility(&instance, &g, &prefix_ids, DEFAULT_ENUM_CAP).expect("finite");
            let u_single =
                exact_utility(&instance, &g, &[rejected], DEFAULT_ENUM_CAP).expect("finite");
            let pair_value = u_prefix.max(u_single);

            let mut table_expected: Vec<u64> = ranked[..=cut].iter().map(|it| it.id).collect();
            table_expected.sort_unstable();

            // Batch output for the domination check.
            let mut evaluator = ExactEvaluator::new(&instance, &g, DEFAULT_ENUM_CAP);
            let batch = tsg_with(&instance, &table, &mut evaluator).expect("solvable");

            let min_cost =
                instance.items().iter().map(|it| it.cost).fold(f64::INFINITY, f64::min);
            let memory_bound = (2.0 * instance.budget() / min_cost).ceil() as usize + 1;

            for o in 0..orders {
                let mut order: Vec<usize> = (0..instance.len()).collect();
                let mut orng = seed.stream(Purpose::Fuzz, &[15, i as u64, o as u64]);
                orng.shuffle(&mut order);
                let stream: Vec<Item> =
                    order.iter().map(|&j| instance.items()[j].clone()).collect();
                let score_fn =
                    |item: &Item| table.get(item.id).expect("score present").r_hat;
                let (sol, stats) = streaming_tsg_exact(
                    stream,
                    instance.budget(),
                    &g,
                    score_fn,
                    DEFAULT_ENUM_CAP,
                )
                .expect("streamable");

                let mut buffer_sorted = stats.final_buffer.clone();
                buffer_sorted.sort_unstable();
                if buffer_sorted != table_expected {
                    return Some(format!(
                        "instance {i} order {o}: buffer {buffer_sorted:?} != top prefix {table_expected:?}"
                    ));
                }
                if sol.candidates[0].ids != prefix_ids
                    || sol.candidates[1].ids != vec![rejected]
                {
                    return Some(format!(
                        "instance {i} order {o}: candidate pair mismatch {:?} / {:?}",
                        sol.candidates[0].ids, sol.candidates[1].ids
                    ));
                }
                if (sol.utility_estimate - pair_value).abs() > 1e-9 {
                    return Some(format!(
                        "instance {i} order {o}: streaming value {} != batch pair value {pair_value}",
                        sol.utility_estimate
                    ));
                }
                if batch.utility_estimate < sol.utility_estimate - 1e-9 {
                    return Some(format!(
                        "instance {i} order {o}: batch output {} below streaming {}",
                        batch.utility_estimate, sol.utility_estimate
                    ));
                }
                if stats.peak_buffer_items > memory_bound {
                    return Some(format!(
                        "instance {i} order {o}: peak buffer {} exceeds bound {memory_bound}",
                        stats.peak_buffer_items
                    ));
                }
            }
            None
        })
        .collect();
    if failures.is_empty() {
        CheckResult::new(
            name,
            true,
            format!("{instances} instances x {orders} arrival orders agree"),
        )
    } else {
        CheckResult::new(name, false, failures.join("; "))
    }
}

/// Smallest success count that keeps a one-sided binomial test of
/// H0: success probability >= p from rejecting at significance `alpha`.
pub fn binomial_min_successes(n: u64, p: f64, alpha: f64) -> u64 {
    let ln_ratio = (p / (1.0 - p)).ln();
    let mut ln_pmf = n as f64 * (1.0 - p).ln();
    let mut cdf = ln_pmf.exp();
    let mut x: u64 = 0;
    while cdf <= alpha && x < n {
        ln_pmf += (((n - x) as f64) / ((x + 1) as f64)).ln() + ln_ratio;
        x += 1;
        cdf += ln_pmf.exp();
    }
    x
}

/// Empirical coverage of the two per-item sample-size routes: at the
/// computed T the estimate must hit the relative-error target in at least a
/// 1 - delta fraction of trials (one-sided binomial test at 99% confidence).
pub fn check_accuracy_coverage(trials: usize, seed: Seed) -> CheckResult {
    let name = "sample-size-accuracy-coverage";
    if trials == 0 {
        return CheckResult::new(name, true, "vacuous: no trials".into());
    }
    let acc = AccuracySpec::new(0.2, 0.1).expect("valid accuracy target");
    let g = ValueFunction::TopR { count: 1 };
    let min_pass = binomial_min_successes(trials as u64, 1.0 - acc.delta, 0.01);
    let mut details = Vec::new();
    for (case, &k) in [1u64, 2, 5].iter().enumerate() {
        let item = Item::new(1, 1.0, ValueDistribution::Bernoulli { mean: 0.5 }).unwrap();
        let instance = Instance::new(vec![item.clone()], k as f64).unwrap();
        let exact = exact_score(&item, &g, k as f64, DEFAULT_ENUM_CAP).unwrap();
        let (g_sup, g1_sup) = g.sup_norms(1.0, k).unwrap();
        let routes = [
            ("hoeffding", hoeffding_samples(k, g_sup, exact, &acc).unwrap()),
            ("mcdiarmid", mcdiarmid_samples(k, g1_sup, exact, &acc).unwrap()),
        ];
        for (route_index, (route, t)) in routes.into_iter().enumerate() {
            let successes: u64 = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let sub = seed
                        .derive((route_index * 10_000_000 + case * 1_000_000 + trial) as u64);
                    let table =
                        estimate_scores(&instance, &g, t as usize, sub).expect("estimable");
                    let r_hat = table.get(1).unwrap().r_hat;
                    u64::from((r_hat - exact).abs() <= acc.epsilon * exact)
                })
                .sum();
            details.push(format!("k={k} {route}: T={t}, {successes}/{trials}"));
            if successes < min_pass {
                return CheckResult::new(
                    name,
                    false,
                    format!(
                        "k={k} {route}: {successes}/{trials} below critical {min_pass} (T={t})"
                    ),
                );
            }
        }
    }
    CheckResult::new(name, true, format!("critical {min_pass}; {}", details.join("; ")))
}

/// Empirical coverage of the gap-based ranking sample size: with the
/// adjacent score gaps at the budget cut equal to 2 * gap, the estimated
/// ranking must identify the true top set in at least 1 - delta of trials.
/// Runs at replication counts 1, 2, and 5 (unit costs, budget k).
pub fn check_ranking_coverage(trials: usize, seed: Seed) -> CheckResult {
    let name = "sample-size-ranking-coverage";
    if trials == 0 {
        return CheckResult::new(name, true, "vacuous: no trials".into());
    }
    let delta = 0.1;
    let g = ValueFunction::Modular;
    let min_pass = binomial_min_successes(trials as u64, 1.0 - delta, 0.01);
    let mut details = Vec::new();
    for (case, &k) in [1u64, 2, 5].iter().enumerate() {
        // Means spaced 0.1 apart; modular scores are k * mean, so every
        // adjacent score gap is 0.1 k and the half-gap is 0.05 k.
        let n = k as usize + 3;
        let means: Vec<f64> = (0..n).map(|i| 0.9 - 0.1 * i as f64).collect();
        let items: Vec<Item> = means
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                Item::new(i as u64 + 1, 1.0, ValueDistribution::Bernoulli { mean: m }).unwrap()
            })
            .collect();
        let instance = Instance::new(items, k as f64).unwrap();
        let cut = k as usize; // unit costs: exactly k items fit
        let ks = vec![k; n];
        let (g_sup, g1_sup) = g.sup_norms(1.0, k).unwrap();
        let gap = 0.05 * k as f64;
        let t = gap_samples(&ks, g_sup, g1_sup, gap, n, delta).unwrap()[0];
        let true_top: Vec<u64> = (1..=cut as u64).collect();
        let successes: u64 = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let sub = seed.derive(9_000_000 + (case * trials + trial) as u64);
                let table = estimate_scores(&instance, &g, t as usize, sub).expect("estimable");
                let mut order: Vec<(u64, f64)> =
                    table.entries().iter().map(|e| (e.item_id, e.r_hat)).collect();
                order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                let mut top: Vec<u64> = order[..cut].iter().map(|e| e.0).collect();
                top.sort_unstable();
                u64::from(top == true_top && order[cut].0 == cut as u64 + 1)
            })
            .sum();
        details.push(format!("k={k}: T={t}, {successes}/{trials}"));
        if successes < min_pass {
            return CheckResult::new(
                name,
                false,
                format!("k={k}: {successes}/{trials} below critical {min_pass} (T={t})"),
            );
        }
    }
    CheckResult::new(name, true, format!("critical {min_pass}; {}", details.join("; ")))
}

/// Run every check. `corpus` scales the randomized corpora; 500 reproduces
/// the sizes the acceptance suite pins. A zero corpus yields vacuous passes
/// with a warning in each detail line.
pub fn verify_suite(corpus: usize, seed: Seed) -> VerifyReport {
    let checks = vec![
        check_relative_cost_cap(corpus * 2, 10, seed),
        check_cost_regularity(corpus, seed),
        check_sketch_sandwich(corpus.min(200), 100_000, seed),
        check_tsg_general_bound(corpus, seed),
        check_tsg_modular_bound(corpus, seed),
        check_tsg_uniform_cost_bound(corpus, seed),
        check_celf_bound(corpus, seed),
        check_streaming_agreement(corpus / 5, corpus.min(100), seed),
        check_accuracy_coverage(corpus, seed),
        check_ranking_coverage(corpus, seed),
    ];
    VerifyReport { checks }
}
