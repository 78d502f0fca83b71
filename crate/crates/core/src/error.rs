use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("rank deficient: estimated rank {rank} of {required} required columns")]
    Rank { rank: usize, required: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("confidence bound unavailable: {0}")]
    Unavailable(String),

    #[error("bootstrap failed: {0}")]
    BootstrapDegenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
    Evaluator,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_) => ErrorClass::Usage,
            Error::Dimension { .. }
            | Error::Schema(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_) => ErrorClass::Data,
            Error::Rank { .. }
            | Error::Degenerate(_)
            | Error::Unavailable(_)
            | Error::BootstrapDegenerate(_) => ErrorClass::Numerical,
            Error::Evaluation(_) => ErrorClass::Evaluator,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
