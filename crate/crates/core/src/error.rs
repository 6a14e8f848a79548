use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variants are grouped so that callers (the CLI in particular) can map them
/// onto usage, numeric-failure and invariant-violation classes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("rate function out of bounds at t = {t}: |f(t)| = {value} > 1")]
    RateOutOfBounds { t: f64, value: f64 },

    #[error("quadrature did not converge on [{a}, {b}] within {max_subdivisions} subdivisions (error estimate {estimate:e})")]
    Quadrature {
        a: f64,
        b: f64,
        max_subdivisions: usize,
        estimate: f64,
    },

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("conditioning guard: {0}")]
    Conditioning(String),

    #[error("magnitude overflow: {0}")]
    Magnitude(String),

    #[error("state count exceeds configured cap of {cap}")]
    StateCap { cap: usize },

    #[error("splitting constants not adjudicated: {0}")]
    NotAdjudicated(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("inverse iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::StateCap { .. }
            | Error::RateOutOfBounds { .. } => ErrorKind::Usage,
            Error::Invariant(_) | Error::NotAdjudicated(_) => ErrorKind::Invariant,
            _ => ErrorKind::Numeric,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Numeric,
    Invariant,
}

pub type Result<T> = std::result::Result<T, Error>;
