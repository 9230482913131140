//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by network construction, parsing, propagation, and the
/// verification engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("shape mismatch in {context}: {detail}")]
    ShapeMismatch {
        context: &'static str,
        detail: String,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid interval: lo {lo} > hi {hi}")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("line {line}: {message}")]
    NnetParse { line: usize, message: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("property schema error at {path}: {message}")]
    PropertySchema { path: String, message: String },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid property: {0}")]
    InvalidProperty(String),

    #[error("oracle limit exceeded: network has {relu_count} ReLU nodes, limit is {limit}")]
    OracleLimit { relu_count: usize, limit: usize },

    #[error("axis {axis} has zero width and cannot be bisected")]
    ZeroWidthAxis { axis: usize },

    #[error(transparent)]
    Lp(#[from] LpFailure),
}

/// Failures of the LP solver itself, as opposed to ordinary outcomes like
/// infeasibility. Never silently mapped to `Infeasible`.
#[derive(Debug, Error)]
pub enum LpFailure {
    #[error("simplex pivot cap of {cap} exceeded")]
    IterationCap { cap: usize },

    #[error("malformed linear program: {0}")]
    Malformed(String),
}
