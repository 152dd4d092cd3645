use thiserror::Error;

/// Errors raised by the estimation and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The bin-probability matrix is too ill-conditioned to invert reliably.
    #[error(
        "indistinguishable ligands: estimator matrix condition number {condition:.3e} exceeds {limit:.0e}"
    )]
    IndistinguishableLigands { condition: f64, limit: f64 },

    /// Every binding event fell outside the retained interval.
    #[error("no binding events retained after filtering")]
    NoEventsRetained,

    /// The Fisher information matrix cannot be inverted.
    #[error("unidentifiable mixture: Fisher information matrix is singular")]
    UnidentifiableMixture,

    /// The S-molecule count is zero, so the CRN has nothing to divide by.
    #[error("no unbound-time signal: S-molecule count is zero")]
    NoUnboundSignal,

    /// Two independent computations of the same quantity disagree.
    #[error("internal consistency check failed: {0}")]
    Internal(String),

    /// A scenario configuration field is invalid.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// Reading or writing data failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}
