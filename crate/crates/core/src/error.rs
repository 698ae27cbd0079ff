//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An item's cost exceeds the budget, so not even one copy fits.
    #[error("item {id} with cost {cost} exceeds budget {budget}")]
    InfeasibleItem { id: u64, cost: f64, budget: f64 },

    #[error("duplicate item id {0}")]
    DuplicateId(u64),

    #[error("unknown item id {0}")]
    UnknownItem(u64),

    #[error("domain error: {0}")]
    Domain(String),

    /// Exact enumeration would exceed the configured term cap.
    #[error("enumeration of {needed} terms exceeds cap {cap}")]
    CapacityExceeded { needed: u128, cap: u64 },

    #[error("distribution has unbounded support; truncate it before asking for a sup norm")]
    UnboundedSupport,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Stream contract violation, e.g. an item id arriving twice.
    #[error("stream protocol violation: {0}")]
    Protocol(String),

    /// A sample-size bound is undefined for the given inputs (e.g. zero score).
    #[error("undefined bound: {0}")]
    UndefinedBound(String),

    #[error("out of range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
