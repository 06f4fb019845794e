use thiserror::Error;

/// Errors raised by the LSVI toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LsviError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("least-squares design is singular even after ridge regularisation")]
    Singular,

    #[error("natural parameter outside the family's domain: {0}")]
    DomainViolation(String),

    #[error("target log-density returned {value} at sample {index}")]
    TargetNotFinite { index: usize, value: f64 },

    #[error("every sample has zero target density; nothing to regress on")]
    AllSamplesDropped,

    #[error("step size collapsed after {halvings} halvings")]
    StepsizeCollapse { halvings: u32 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate summary statistic: {0}")]
    DegenerateSummary(String),

    #[error("constant column {column} cannot be rescaled")]
    ConstantColumn { column: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LsviError {
    fn from(err: std::io::Error) -> Self {
        LsviError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LsviError>;
