//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Mathematical findings (a stability check failing, an empty multiplier
/// set) are *not* errors; errors mean the tool could not carry out the
/// requested computation.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed inconsistent data (dimension mismatch, unknown id, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// The operation is not defined for this problem body or convex piece.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Every grid point of a localized solve was infeasible (+inf).
    #[error("local problem has no feasible point in the search ball")]
    EmptyLocalProblem,

    /// A subdifferential was requested outside the effective domain.
    #[error("point lies outside the effective domain of the convex piece")]
    EmptySubdifferential,

    /// An inner numerical routine failed (singular system, LP degeneracy, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A probe could not produce an estimate (multi-valued rows, empty sample, ...).
    #[error("probe failed: {0}")]
    Probe(String),

    /// An invalid run configuration (non-positive tolerance, even grid, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: invalid input/config is 2, any other
    /// failure is 1. Probe verdicts never influence the exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Config(_) => 2,
            _ => 1,
        }
    }
}
