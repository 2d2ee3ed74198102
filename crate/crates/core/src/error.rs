//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by grid construction, operators and solvers.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Parameter or argument outside the documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// Two fields (or a field and an operator) live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A field contains NaN or infinite samples.
    #[error("non-finite field values: {0}")]
    NonFinite(String),

    /// Requested operation is outside the range where this backend is accurate.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The quadratic part of the energy is not positive on the given field, so
    /// the scalar Nehari projection does not exist.
    #[error("quadratic form non-positive (A = {a:.6e}); field lies outside the definite Nehari regime")]
    OutsideNehariRegime { a: f64 },

    /// A spectral splitting was requested but an eigenvalue sits inside the
    /// degeneracy margin around zero, so the sign of the subspace is ambiguous.
    #[error("degenerate splitting: eigenvalue {zeta:.6e} within margin {margin:.6e} of zero")]
    DegenerateSplit { zeta: f64, margin: f64 },

    /// An iterative eigensolver or descent loop diverged or stalled.
    #[error("solver diverged: {0}")]
    SolverDiverged(String),

    /// An iterative solver hit its iteration budget before reaching tolerance.
    #[error("iteration budget exhausted: {0}")]
    BudgetExhausted(String),

    /// Snapshot or cache I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Snapshot sidecar (de)serialization failure.
    #[error("sidecar JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
