//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Variants carry
//! enough context to be actionable from a CLI error message; none of them
//! wrap a panic.

use thiserror::Error;

/// Errors produced by dataset handling, training, attacks, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A dataset (or a required subset, e.g. one class) had no rows.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// Row length or weight-vector length did not match the expected
    /// dimensionality.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A label outside {-1, +1} was supplied.
    #[error("invalid label {value} at row {index}: labels must be -1 or +1")]
    InvalidLabel { index: usize, value: f64 },

    /// A feature value was NaN or infinite.
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    /// A text or binary data file failed to parse.
    #[error("malformed data file {path} (record {record}): {msg}")]
    MalformedData {
        path: String,
        record: usize,
        msg: String,
    },

    /// A split requested more points than the dataset holds.
    #[error("infeasible split: requested {requested} points but only {available} available")]
    InfeasibleSplit { requested: usize, available: usize },

    /// Too few rows for the requested neighbour count or sample size.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A configuration value was out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("{what} did not converge after {iters} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    /// The linear system behind the implicit gradient is singular or too
    /// ill-conditioned to trust.
    #[error("degenerate training Hessian: condition estimate {cond:.3e}")]
    DegenerateHessian { cond: f64 },

    /// An iterative procedure blew up numerically.
    #[error("objective diverged to {objective:.3e}")]
    Divergence { objective: f64 },

    /// Filesystem error while reading data or writing outputs.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// Config or model JSON failed to parse or serialize.
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
