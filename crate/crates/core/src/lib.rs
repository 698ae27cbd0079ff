//! Budgeted stochastic utility maximization driven by replication test scores.
//!
//! Items have random values and heterogeneous costs. The utility of a set is
//! the expected value of a symmetric, monotone group-value function applied to
//! one realization per selected item, and the feasible sets are those whose
//! total cost stays within a budget. Each item is ranked by its replication
//! test score: the expected group value of as many independent copies of the
//! item as the budget affords. The [`solvers`] module implements the
//! two-candidate greedy selection driven by those scores, a single-pass
//! streaming variant, a lazy value-oracle greedy benchmark, and an exact
//! oracle for small instances. Supporting modules cover score estimation and
//! the sketch quantities used to bound utilities ([`scores`]), sufficient
//! sample sizes and approximation-factor calculators ([`samples`]), synthetic
//! and StackExchange-derived experiment pipelines ([`harness`],
//! [`stackexchange`]).

pub mod error;
pub mod harness;
pub mod instance;
pub mod rng;
pub mod samples;
pub mod scores;
pub mod solvers;
pub mod stackexchange;
pub mod value_fn;

pub use error::{Error, Result};
pub use instance::{pareto_from_mean, replication_count, Instance, Item, ValueDistribution};
pub use rng::{Purpose, Seed, StreamRng};
pub use scores::{ScoreEntry, ScoreTable, SketchReport};
pub use solvers::{Solution, StreamStats, Winner};
pub use value_fn::ValueFunction;
