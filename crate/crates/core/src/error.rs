use thiserror::Error;

/// Errors raised by samplers, models, dynamics and estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{process} diverged at iteration {iteration}")]
    Diverged {
        process: &'static str,
        iteration: usize,
    },

    #[error("non-finite value encountered while evaluating {0}")]
    NonFinite(&'static str),

    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("all gamma draws underflowed after {0} attempts")]
    DirichletUnderflow(usize),

    #[error("malformed dataset at line {line}: {reason}")]
    Dataset { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
