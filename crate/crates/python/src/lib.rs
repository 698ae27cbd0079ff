//! Python bindings: instances, score tables, the solvers, the sketch
//! quantities, and the sample-size calculators.
//!
//! Build the cdylib with `cargo build -p testscore-python` and import the
//! produced shared object as `testscore_py` (see python/smoke_test.py).

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use testscore::error::Error;
use testscore::harness::{generate_synthetic, evaluate_on_test, DistFamily, SyntheticConfig};
use testscore::samples::{
    curvature_samples, gap_samples, hoeffding_samples, mcdiarmid_samples, topset_samples,
    AccuracySpec, GuaranteeRegime,
};
use testscore::scores;
use testscore::solvers;
use testscore::stackexchange;
use testscore::value_fn::ValueFunction;
use testscore::{Seed, StreamRng};

fn err(e: Error) -> PyErr {
    match e {
        Error::Parse { .. } | Error::Io(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_vf(tag: &str) -> PyResult<ValueFunction> {
    tag.parse().map_err(err)
}

/// Ground set of the selection problem: items with costs and value
/// distributions, plus a budget.
#[pyclass(name = "Instance", skip_from_py_object)]
#[derive(Clone)]
struct PyInstance {
    inner: testscore::Instance,
}

#[pymethods]
impl PyInstance {
    /// Parse the line-oriented instance format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<PyInstance> {
        Ok(PyInstance { inner: testscore::Instance::from_text(text).map_err(err)? })
    }

    /// Parse the structured (JSON) instance format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyInstance> {
        Ok(PyInstance { inner: testscore::Instance::from_json(text).map_err(err)? })
    }

    /// Load either format from a file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<PyInstance> {
        let text = std::fs::read_to_string(path).map_err(|e| err(Error::Io(e)))?;
        if text.trim_start().starts_with('{') {
            PyInstance::from_json(&text)
        } else {
            PyInstance::from_text(&text)
        }
    }

    /// Generate the synthetic instance with the given index: uniform means,
    /// the chosen family (bernoulli, exponential, pareto:<shape>,
    /// deterministic), and costs 1 + lambda * mean.
    #[staticmethod]
    #[pyo3(signature = (n, budget, dist, lam, seed, index=0, independent_costs=false))]
    fn synthetic(
        n: usize,
        budget: f64,
        dist: &str,
        lam: f64,
        seed: u64,
        index: u64,
        independent_costs: bool,
    ) -> PyResult<PyInstance> {
        let family: DistFamily = dist.parse().map_err(err)?;
        let mut cfg = SyntheticConfig::new(ValueFunction::Modular, family);
        cfg.n = n;
        cfg.budget = budget;
        cfg.lambda = lam;
        cfg.seed = seed;
        cfg.cost_mode = if independent_costs {
            testscore::harness::CostMode::Independent
        } else {
            testscore::harness::CostMode::Correlated
        };
        Ok(PyInstance { inner: generate_synthetic(&cfg, index).map_err(err)? })
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.budget()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Item ids in instance order.
    fn item_ids(&self) -> Vec<u64> {
        self.inner.items().iter().map(|it| it.id).collect()
    }

    fn cost(&self, id: u64) -> PyResult<f64> {
        Ok(self.inner.item(id).map_err(err)?.cost)
    }

    fn mean(&self, id: u64) -> PyResult<f64> {
        Ok(self.inner.item(id).map_err(err)?.dist.mean())
    }

    /// floor(budget / cost) for one item.
    fn replication_count(&self, id: u64) -> PyResult<u64> {
        self.inner.replication_count(id).map_err(err)
    }

    fn total_cost(&self, ids: Vec<u64>) -> PyResult<f64> {
        self.inner.total_cost(&ids).map_err(err)
    }

    /// Relative cost d(S) = sum of 1/k_i.
    fn relative_cost(&self, ids: Vec<u64>) -> PyResult<f64> {
        scores::relative_cost(&self.inner, &ids).map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, budget={})", self.inner.len(), self.inner.budget())
    }
}

/// Per-item replication test scores (estimated or exact).
#[pyclass(name = "ScoreTable", skip_from_py_object)]
#[derive(Clone)]
struct PyScoreTable {
    inner: scores::ScoreTable,
}

#[pymethods]
impl PyScoreTable {
    /// Rows of (item_id, cost, k, m, r_hat, degraded).
    fn entries(&self) -> Vec<(u64, f64, u64, u64, f64, bool)> {
        self.inner
            .entries()
            .iter()
            .map(|e| (e.item_id, e.cost, e.k, e.m, e.r_hat, e.degraded))
            .collect()
    }

    fn r_hat(&self, id: u64) -> PyResult<f64> {
        Ok(self.inner.get(id).map_err(err)?.r_hat)
    }

    #[getter]
    fn value_fn(&self) -> String {
        self.inner.value_fn.clone()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// A solver's output set with its evaluated utility.
#[pyclass(name = "Solution", skip_from_py_object)]
#[derive(Clone)]
struct PySolution {
    inner: solvers::Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn selected(&self) -> Vec<u64> {
        self.inner.selected.clone()
    }

    #[getter]
    fn total_cost(&self) -> f64 {
        self.inner.total_cost
    }

    #[getter]
    fn utility_estimate(&self) -> f64 {
        self.inner.utility_estimate
    }

    #[getter]
    fn utility_stderr(&self) -> f64 {
        self.inner.utility_stderr
    }

    #[getter]
    fn winner(&self) -> String {
        self.inner.winner.to_string()
    }

    /// Candidate sets as (ids, cost, estimate, stderr).
    #[getter]
    fn candidates(&self) -> Vec<(Vec<u64>, f64, f64, f64)> {
        self.inner
            .candidates
            .iter()
            .map(|c| (c.ids.clone(), c.cost, c.estimate, c.stderr))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(selected={:?}, utility={}, winner={})",
            self.inner.selected, self.inner.utility_estimate, self.inner.winner
        )
    }
}

/// Estimate every item's score from `samples` draws per item.
#[pyfunction]
fn estimate_scores(
    instance: &PyInstance,
    value_fn: &str,
    samples: usize,
    seed: u64,
) -> PyResult<PyScoreTable> {
    let g = parse_vf(value_fn)?;
    Ok(PyScoreTable {
        inner: scores::estimate_scores(&instance.inner, &g, samples, Seed(seed)).map_err(err)?,
    })
}

/// Exact scores for finite-support items (or the modular closed form).
#[pyfunction]
fn exact_scores(instance: &PyInstance, value_fn: &str) -> PyResult<PyScoreTable> {
    let g = parse_vf(value_fn)?;
    Ok(PyScoreTable {
        inner: scores::exact_score_table(&instance.inner, &g, scores::DEFAULT_ENUM_CAP)
            .map_err(err)?,
    })
}

/// Two-candidate greedy on estimated scores with a Monte Carlo comparison.
#[pyfunction]
#[pyo3(signature = (instance, table, eval_reps=10_000, seed=0))]
fn solve_tsg(
    instance: &PyInstance,
    table: &PyScoreTable,
    eval_reps: usize,
    seed: u64,
) -> PyResult<PySolution> {
    Ok(PySolution {
        inner: solvers::tsg(&instance.inner, &table.inner, eval_reps, Seed(seed)).map_err(err)?,
    })
}

/// Two-candidate greedy with exact utilities (finite supports only).
#[pyfunction]
fn solve_tsg_exact(
    instance: &PyInstance,
    table: &PyScoreTable,
    value_fn: &str,
) -> PyResult<PySolution> {
    let g = parse_vf(value_fn)?;
    let mut evaluator =
        solvers::ExactEvaluator::new(&instance.inner, &g, scores::DEFAULT_ENUM_CAP);
    Ok(PySolution {
        inner: solvers::tsg_with(&instance.inner, &table.inner, &mut evaluator).map_err(err)?,
    })
}

/// Single-pass streaming selection. `order` lists item ids in arrival
/// order; scores come from `table`.
#[pyfunction]
#[pyo3(signature = (instance, table, order, value_fn, eval_reps=10_000, seed=0))]
fn solve_streaming(
    instance: &PyInstance,
    table: &PyScoreTable,
    order: Vec<u64>,
    value_fn: &str,
    eval_reps: usize,
    seed: u64,
) -> PyResult<(PySolution, usize, usize, Vec<u64>)> {
    let g = parse_vf(value_fn)?;
    let stream: Vec<testscore::Item> = order
        .iter()
        .map(|&id| Ok(instance.inner.item(id).map_err(err)?.clone()))
        .collect::<PyResult<_>>()?;
    let score_fn =
        |item: &testscore::Item| table.inner.get(item.id).map(|e| e.r_hat).unwrap_or(0.0);
    let (sol, stats) = solvers::streaming_tsg(
        stream,
        instance.inner.budget(),
        &g,
        score_fn,
        eval_reps,
        Seed(seed),
    )
    .map_err(err)?;
    Ok((PySolution { inner: sol }, stats.peak_buffer_items, stats.updates, stats.final_buffer))
}

/// Lazy value-oracle greedy benchmark (better of a gain pass and a
/// gain-per-cost pass).
#[pyfunction]
#[pyo3(signature = (instance, value_fn, n_eval=150, seed=0))]
fn solve_celf(
    instance: &PyInstance,
    value_fn: &str,
    n_eval: usize,
    seed: u64,
) -> PyResult<PySolution> {
    let g = parse_vf(value_fn)?;
    Ok(PySolution { inner: solvers::celf(&instance.inner, &g, n_eval, Seed(seed)).map_err(err)? })
}

/// Exhaustive exact oracle for small finite-support instances.
#[pyfunction]
fn solve_exact(instance: &PyInstance, value_fn: &str) -> PyResult<PySolution> {
    let g = parse_vf(value_fn)?;
    Ok(PySolution {
        inner: solvers::brute_force(&instance.inner, &g, scores::DEFAULT_ENUM_CAP).map_err(err)?,
    })
}

/// Evaluate a group value function on a vector.
#[pyfunction]
fn evaluate(value_fn: &str, xs: Vec<f64>) -> PyResult<f64> {
    parse_vf(value_fn)?.evaluate(&xs).map_err(err)
}

/// Marginal value of appending z.
#[pyfunction]
fn marginal(value_fn: &str, xs: Vec<f64>, z: f64) -> PyResult<f64> {
    parse_vf(value_fn)?.marginal(&xs, z).map_err(err)
}

/// Sketch quantities for a set: (d, v_min, v_avg, v_max, p_factor,
/// q_factor).
#[pyfunction]
fn score_sketch(
    instance: &PyInstance,
    table: &PyScoreTable,
    ids: Vec<u64>,
) -> PyResult<(f64, f64, f64, f64, f64, f64)> {
    let s = scores::score_sketch(&instance.inner, &table.inner, &ids).map_err(err)?;
    Ok((s.d, s.v_min, s.v_avg, s.v_max, s.p_factor, s.q_factor))
}

/// Monte Carlo check of the sketch sandwich on one feasible set:
/// (u_hat, stderr, lower, upper, pass).
#[pyfunction]
#[pyo3(signature = (instance, value_fn, ids, mc_reps=100_000, seed=0))]
fn verify_sandwich(
    instance: &PyInstance,
    value_fn: &str,
    ids: Vec<u64>,
    mc_reps: usize,
    seed: u64,
) -> PyResult<(f64, f64, f64, f64, bool)> {
    let g = parse_vf(value_fn)?;
    let r = scores::verify_sandwich(&instance.inner, &g, &ids, mc_reps, Seed(seed)).map_err(err)?;
    Ok((r.u_hat, r.stderr, r.lower, r.upper, r.pass))
}

/// Evaluate a set on held-out test realizations.
#[pyfunction]
#[pyo3(signature = (instance, value_fn, ids, reps=50_000, seed=0))]
fn evaluate_on_test_stream(
    instance: &PyInstance,
    value_fn: &str,
    ids: Vec<u64>,
    reps: usize,
    seed: u64,
) -> PyResult<f64> {
    let g = parse_vf(value_fn)?;
    evaluate_on_test(&instance.inner, &g, &ids, reps, Seed(seed)).map_err(err)
}

/// Sufficient samples from the bounded-range route, whole batches of k.
#[pyfunction]
fn hoeffding_sample_size(k: u64, g_sup: f64, score: f64, epsilon: f64, delta: f64) -> PyResult<u64> {
    let acc = AccuracySpec::new(epsilon, delta).map_err(err)?;
    hoeffding_samples(k, g_sup, score, &acc).map_err(err)
}

/// Sufficient samples from the bounded-difference route.
#[pyfunction]
fn mcdiarmid_sample_size(
    k: u64,
    g1_sup: f64,
    score: f64,
    epsilon: f64,
    delta: f64,
) -> PyResult<u64> {
    let acc = AccuracySpec::new(epsilon, delta).map_err(err)?;
    mcdiarmid_samples(k, g1_sup, score, &acc).map_err(err)
}

/// Replication-free sufficient samples from the curvature route.
#[pyfunction]
fn curvature_sample_size(
    g1_sup: f64,
    mu1: f64,
    alpha: f64,
    epsilon: f64,
    delta: f64,
) -> PyResult<u64> {
    let acc = AccuracySpec::new(epsilon, delta).map_err(err)?;
    curvature_samples(g1_sup, mu1, alpha, &acc).map_err(err)
}

/// Per-item sufficient samples for an accurate budget-cut prefix.
#[pyfunction]
fn topset_sample_sizes(
    ks: Vec<u64>,
    g_sup: f64,
    g1_sup: f64,
    score_cut: f64,
    n: usize,
    epsilon: f64,
    delta: f64,
) -> PyResult<Vec<u64>> {
    let acc = AccuracySpec::new(epsilon, delta).map_err(err)?;
    topset_samples(&ks, g_sup, g1_sup, score_cut, n, &acc).map_err(err)
}

/// Per-item sufficient samples for a fully accurate ranking around the cut.
#[pyfunction]
fn gap_sample_sizes(
    ks: Vec<u64>,
    g_sup: f64,
    g1_sup: f64,
    gap: f64,
    n: usize,
    delta: f64,
) -> PyResult<Vec<u64>> {
    gap_samples(&ks, g_sup, g1_sup, gap, n, delta).map_err(err)
}

/// Worst-case approximation factor. With no keyword arguments this is the
/// general constant; `beta` selects the cost-regular refinement; `alpha`
/// (optionally with `beta` and `relative_cost`) the curvature refinement.
#[pyfunction]
#[pyo3(signature = (epsilon=0.0, beta=None, alpha=None, relative_cost=None))]
fn guarantee_factor(
    epsilon: f64,
    beta: Option<f64>,
    alpha: Option<f64>,
    relative_cost: Option<f64>,
) -> PyResult<f64> {
    let regime = match (alpha, beta) {
        (Some(alpha), beta) => GuaranteeRegime::Curvature { alpha, beta, relative_cost },
        (None, Some(beta)) => GuaranteeRegime::BetaCosts { beta },
        (None, None) => GuaranteeRegime::General,
    };
    testscore::samples::guarantee_factor(&regime, epsilon).map_err(err)
}

/// Posterior mean answer quality (u + a0) / (u + d + a0 + b0).
#[pyfunction]
fn answer_score(upvotes: u32, downvotes: u32, a0: f64, b0: f64) -> PyResult<f64> {
    let prior = stackexchange::BetaPrior::new(a0, b0).map_err(err)?;
    Ok(stackexchange::answer_score(upvotes, downvotes, &prior))
}

/// Deterministic uniform draws from a named stream, for quick checks.
#[pyfunction]
fn uniform_stream(seed: u64, tag: u64, count: usize) -> Vec<f64> {
    let mut rng: StreamRng = Seed(seed).stream(testscore::Purpose::Fuzz, &[tag]);
    (0..count).map(|_| rng.uniform()).collect()
}

#[pymodule]
fn testscore_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyScoreTable>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(estimate_scores, m)?)?;
    m.add_function(wrap_pyfunction!(exact_scores, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tsg, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tsg_exact, m)?)?;
    m.add_function(wrap_pyfunction!(solve_streaming, m)?)?;
    m.add_function(wrap_pyfunction!(solve_celf, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(marginal, m)?)?;
    m.add_function(wrap_pyfunction!(score_sketch, m)?)?;
    m.add_function(wrap_pyfunction!(verify_sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_on_test_stream, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(mcdiarmid_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(curvature_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(topset_sample_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(gap_sample_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(guarantee_factor, m)?)?;
    m.add_function(wrap_pyfunction!(answer_score, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_stream, m)?)?;
    Ok(())
}
