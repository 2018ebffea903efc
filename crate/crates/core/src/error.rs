use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Cholesky factorization failed even after jitter escalation.
    #[error("factorization failed (last jitter tried: {jitter:e})")]
    Factorization { jitter: f64 },

    #[error("unsupported dimension {0} (at most {1} supported)")]
    UnsupportedDimension(usize, usize),

    #[error("objective evaluation failed: {0}")]
    Evaluation(String),

    #[error("busy set is empty; distance undefined")]
    EmptyBusySet,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("unknown {kind} '{name}'; valid names: {valid}")]
    UnknownName {
        kind: &'static str,
        name: String,
        valid: String,
    },

    #[error("trace format error at line {line}: {msg}")]
    TraceFormat { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
