//! Error classification for the command-line tool.
//!
//! Every failure is mapped onto one of three process exit codes (success is
//! 0, and `clap` itself exits with 2 on malformed invocations):
//!
//! * **1** — a scientific cross-check failed beyond its tolerance: the run
//!   completed and its outputs were written, but a quantitative claim the
//!   command verifies did not hold.
//! * **2** — the invocation or configuration is unusable: unknown flags,
//!   unreadable or invalid TOML, parameters outside the documented domain.
//!   Nothing is computed and no partial outputs are written.
//! * **3** — the numerics failed: a descent or eigensolver diverged or
//!   exhausted its iteration budget.

use choquard::CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Scientific cross-check failure (exit 1).
    Science(String),
    /// Bad invocation or configuration (exit 2).
    Config(String),
    /// Numerical divergence or budget exhaustion (exit 3).
    Numerics(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Science(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerics(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Science(m) => write!(f, "scientific check failed: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerics(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::SolverDiverged(_)
            | CoreError::BudgetExhausted(_)
            | CoreError::NonFinite(_)
            | CoreError::OutsideNehariRegime { .. } => CliError::Numerics(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("JSON serialization: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
