//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Tolerances and corpus sizes are pinned here.
//!
//! Run with `cargo test -p testscore --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use testscore::harness::verify::{
    binomial_min_successes, check_accuracy_coverage, check_ranking_coverage,
    check_relative_cost_cap, check_sketch_sandwich, check_streaming_agreement,
    check_tsg_general_bound, check_tsg_modular_bound, check_tsg_uniform_cost_bound,
};
use testscore::harness::{run_comparison, CostMode, DistFamily, SyntheticConfig};
use testscore::instance::{Instance, Item, ValueDistribution};
use testscore::scores::{exact_score_table, DEFAULT_ENUM_CAP};
use testscore::solvers::{tsg_with, ExactEvaluator, Winner};
use testscore::stackexchange::{answer_score, build_profiles, parse_dump, BetaPrior};
use testscore::value_fn::ValueFunction;
use testscore::Seed;

const SEED: Seed = Seed(0x7e57_5c0e);

fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("{verdict}: {criterion} — {detail}");
    assert!(pass, "{criterion}: {detail}");
}

// Exact-oracle approximation bound: 500 random finite-support instances
// (n <= 10, budget sized for 2..6 items), exact scores and exact utilities,
// every ratio to the brute-force optimum at least 0.0562.
#[test]
fn criterion_01_general_approximation_bound() {
    let result = check_tsg_general_bound(500, SEED);
    report("criterion 01 general approximation bound >= 0.0562", result.pass, &result.detail);
}

// Modular zero-curvature bound: same corpus restricted to the modular
// function must stay above 5/17 everywhere.
#[test]
fn criterion_02_modular_bound() {
    let result = check_tsg_modular_bound(500, SEED);
    report("criterion 02 modular bound >= 5/17", result.pass, &result.detail);
}

// Uniform-cost refinement: equal costs push the bound up to
// (1 - 1/e) / (5 - 1/e).
#[test]
fn criterion_03_uniform_cost_bound() {
    let result = check_tsg_uniform_cost_bound(500, SEED);
    report("criterion 03 uniform-cost bound >= (1-1/e)/(5-1/e)", result.pass, &result.detail);
}

// Relative-cost cap: 10^4 fuzzed feasible sets across 10^3 random cost
// profiles all satisfy d(S) <= 1.7, and a constructed near-worst-case
// profile reaches d >= 61/36 - 0.01.
#[test]
fn criterion_04_relative_cost_cap() {
    let result = check_relative_cost_cap(1000, 10, SEED);
    report("criterion 04 relative cost cap d(S) <= 1.7", result.pass, &result.detail);
}

// Sketch sandwich: 200 random (instance, function, set) triples per
// diminishing-returns variant pass the lower/upper factor bounds with a
// 3-standard-error Monte Carlo margin at 1e5 reps.
#[test]
fn criterion_05_sketch_sandwich() {
    let result = check_sketch_sandwich(200, 100_000, SEED);
    report("criterion 05 sketch sandwich at 3 SE", result.pass, &result.detail);
}

// Streaming equivalence and memory: 100 instances x 100 arrival orders with
// distinct scores; the buffer converges to the top-scored prefix, the
// candidate pair matches the batch cut pair in exact value, and the peak
// buffer respects ceil(2B / min cost) + 1.
#[test]
fn criterion_06_streaming_equivalence_and_memory() {
    let result = check_streaming_agreement(100, 100, SEED);
    report("criterion 06 streaming equivalence and memory bound", result.pass, &result.detail);
}

// Sample-size coverage: at the computed sufficient sizes, empirical
// accuracy / correct-top-set frequency over 500 trials clears a one-sided
// binomial test at 99% confidence for k in {1, 2, 5}, eps = 0.2,
// delta = 0.1.
#[test]
fn criterion_07_sample_size_coverage() {
    let accuracy = check_accuracy_coverage(500, SEED);
    report("criterion 07a per-item accuracy coverage", accuracy.pass, &accuracy.detail);
    let ranking = check_ranking_coverage(500, SEED);
    report("criterion 07b top-set ranking coverage", ranking.pass, &ranking.detail);
}

// Desk-scale concentration: Bernoulli values, modular objective,
// lambda in {0, 3, 27}, 250 training samples, 20 instances of n = 100 and
// budget 30; the pooled ratio to the benchmark has median >= 0.9 and
// minimum >= 0.75 (the full 100-instance protocol stays behind the CLI
// --full flag).
#[test]
fn criterion_08_benchmark_concentration() {
    let mut ratios: Vec<f64> = Vec::new();
    for (i, lambda) in [0.0, 3.0, 27.0].into_iter().enumerate() {
        let mut cfg = SyntheticConfig::new(ValueFunction::Modular, DistFamily::Bernoulli);
        cfg.lambda = lambda;
        cfg.train_samples = 250;
        cfg.instances = 20;
        cfg.seed = SEED.derive(800 + i as u64).0;
        cfg.cost_mode = CostMode::Correlated;
        let rows = run_comparison(&cfg).expect("comparison runs");
        assert_eq!(rows.len(), 20);
        ratios.extend(rows.iter().map(|r| r.ratio).filter(|r| r.is_finite()));
    }
    ratios.sort_by(|a, b| a.total_cmp(b));
    let median = ratios[ratios.len() / 2];
    let min = ratios[0];
    let pass = median >= 0.9 && min >= 0.75;
    report(
        "criterion 08 benchmark ratio concentration",
        pass,
        &format!("{} ratios, median {median:.4} (>= 0.9), min {min:.4} (>= 0.75)", ratios.len()),
    );
}

// Two-candidate fix: on the two-item trap instance the plain greedy prefix
// is worth 1 while the returned solution is worth 11, the optimum.
#[test]
fn criterion_09_two_candidate_fix() {
    let instance = Instance::new(
        vec![
            Item::new(1, 12.0, ValueDistribution::Deterministic { value: 11.0 }).unwrap(),
            Item::new(2, 1.0, ValueDistribution::Deterministic { value: 1.0 }).unwrap(),
        ],
        12.0,
    )
    .unwrap();
    let g = ValueFunction::Modular;
    let table = exact_score_table(&instance, &g, DEFAULT_ENUM_CAP).unwrap();
    let mut evaluator = ExactEvaluator::new(&instance, &g, DEFAULT_ENUM_CAP);
    let sol = tsg_with(&instance, &table, &mut evaluator).unwrap();
    let naive_value = sol.candidates[0].estimate;
    let pass = naive_value == 1.0
        && sol.utility_estimate == 11.0
        && sol.selected == vec![1]
        && sol.winner == Winner::SStarStar;
    report(
        "criterion 09 two-candidate fix on the trap instance",
        pass,
        &format!("prefix-only value {naive_value}, returned value {}", sol.utility_estimate),
    );
}

// StackExchange scoring against an independent rational-arithmetic oracle,
// plus the 89-expert profile count when the archived dump is available
// (pointed to by TESTSCORE_DUMP_DIR; skipped otherwise).
#[test]
fn criterion_10_stackexchange_scoring() {
    // 20 golden triples: score must equal (u + a0) / (u + d + a0 + b0)
    // computed in integer arithmetic.
    let cases: [(u32, u32, u64, u64); 20] = [
        (0, 0, 5, 5),
        (0, 0, 2, 8),
        (0, 0, 10, 10),
        (0, 0, 4, 16),
        (0, 0, 20, 20),
        (0, 0, 8, 32),
        (9, 1, 5, 5),
        (1, 9, 5, 5),
        (3, 0, 2, 8),
        (0, 3, 2, 8),
        (17, 4, 10, 10),
        (100, 0, 10, 10),
        (0, 100, 10, 10),
        (12, 12, 4, 16),
        (7, 2, 20, 20),
        (2, 7, 20, 20),
        (50, 25, 8, 32),
        (25, 50, 8, 32),
        (1, 0, 5, 5),
        (0, 1, 5, 5),
    ];
    let mut worst: f64 = 0.0;
    for (u, d, a0, b0) in cases {
        let prior = BetaPrior::new(a0 as f64, b0 as f64).unwrap();
        let got = answer_score(u, d, &prior);
        let numerator = u as u64 + a0;
        let denominator = u as u64 + d as u64 + a0 + b0;
        let oracle = numerator as f64 / denominator as f64;
        worst = worst.max((got - oracle).abs());
        assert!(
            (got - oracle).abs() <= 1e-15,
            "({u}, {d}, {a0}, {b0}): {got} vs {numerator}/{denominator}"
        );
    }
    report(
        "criterion 10a posterior scores match rational oracle",
        true,
        &format!("20 golden triples, worst absolute error {worst:.1e}"),
    );

    match std::env::var("TESTSCORE_DUMP_DIR") {
        Ok(dir) => {
            let posts = std::path::Path::new(&dir).join("Posts.xml");
            let votes = std::path::Path::new(&dir).join("Votes.xml");
            let records = parse_dump(&posts, &votes).expect("dump parses");
            let prior = BetaPrior::new(5.0, 5.0).unwrap();
            let profiles = build_profiles(&records, 130, &prior).unwrap();
            report(
                "criterion 10b archived dump yields 89 expert profiles",
                profiles.len() == 89,
                &format!("{} profiles with at least 130 answers", profiles.len()),
            );
        }
        Err(_) => {
            println!(
                "SKIP: criterion 10b archived dump profile count — set TESTSCORE_DUMP_DIR to run"
            );
        }
    }
}

// The binomial critical values behind criterion 07 guard the test itself.
#[test]
fn coverage_test_critical_value_sanity() {
    let c = binomial_min_successes(500, 0.9, 0.01);
    assert!(
        (425..=445).contains(&c),
        "critical value {c} for 500 trials at 90% / 99% confidence"
    );
}
