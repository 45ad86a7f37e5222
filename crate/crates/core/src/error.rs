use thiserror::Error;

/// Errors raised by solvers, problem builders and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resolvent has no exact evaluation")]
    MissingExactResolvent,

    #[error("inexact oracle could not certify accuracy {requested:e}: {reason}")]
    InexactOracle { requested: f64, reason: String },

    #[error("non-finite iterate at k={k}: {detail}")]
    NonFinite { k: usize, detail: String },

    #[error("divergence guard tripped at k={k}: |z| = {norm:e} exceeds {limit:e}")]
    Diverged { k: usize, norm: f64, limit: f64 },

    #[error(
        "Dykstra did not meet the stopping surrogate within {rounds} rounds \
         (last step {step:e}, max set distance {infeasibility:e})"
    )]
    DykstraNotConverged {
        rounds: usize,
        step: f64,
        infeasibility: f64,
    },

    #[error("component index {index} out of range for {count} components")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Coarse classification used for CLI exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Context { source, .. } => source.kind(),
            Error::Config(_) | Error::InvalidParameter(_) | Error::Unsupported(_) => {
                ErrorKind::Usage
            }
            Error::Data { .. } | Error::Io(_) | Error::Csv(_) | Error::DimensionMismatch { .. } => {
                ErrorKind::Data
            }
            Error::MissingExactResolvent
            | Error::InexactOracle { .. }
            | Error::NonFinite { .. }
            | Error::Diverged { .. }
            | Error::DykstraNotConverged { .. }
            | Error::IndexOutOfRange { .. } => ErrorKind::Solver,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Solver,
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
