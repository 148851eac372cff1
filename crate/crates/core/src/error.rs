use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown inequality `{name}`; valid identifiers: {valid}")]
    UnknownInequality { name: String, valid: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("invalid probability table: {0}")]
    InvalidTable(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("distribution is not normalized (sum = {0})")]
    NotNormalized(f64),

    #[error("cannot parse inequality file, line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("sample cloud is empty")]
    EmptyCloud,

    #[error("curves do not overlap: {0}")]
    NoOverlap(String),

    #[error("bisection range error: {0}")]
    BisectionRange(String),

    #[error("conditioning on outcome {outcome} which has zero probability")]
    DegenerateConditioning { outcome: usize },

    #[error("no states in the requested violation bin [{lo:.5}, {hi:.5}]")]
    EmptyStateSet { lo: f64, hi: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
