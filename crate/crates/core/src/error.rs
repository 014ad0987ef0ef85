use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The variants are grouped by how a caller is expected to react: bad input
/// (`Domain`, `Config`, `Parameter`, `IsolatedVertex`, `Parse`), a numerical
/// failure that may go away with other settings (`NonConvergence`,
/// `NotPositiveDefinite`, `SweepFailed`), or an environment problem (`Io`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("vertex {vertex} has no neighbours within delta = {delta}; use a larger bandwidth")]
    IsolatedVertex { vertex: usize, delta: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        worst_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("sweep failed: {failed} of {total} cells failed (first: {first})")]
    SweepFailed { failed: usize, total: usize, first: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// Process exit code used by the command-line driver: 1 for domain and
    /// configuration problems, 2 for numerical non-convergence, 3 for IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } | Error::NotPositiveDefinite { .. } | Error::SweepFailed { .. } => 2,
            Error::Io(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
