use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed probabilities: {0}")]
    MalformedProbabilities(String),
    #[error("capacity of resource {index} is not positive ({value})")]
    NonpositiveCapacity { index: usize, value: f64 },
    #[error("instance has no null type")]
    MissingNullType,
    #[error("instance has no null action")]
    MissingNullAction,
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("resource {resource} would hold {occupied} > capacity {capacity} at t={t}")]
    ConstraintViolation {
        t: usize,
        resource: usize,
        occupied: f64,
        capacity: f64,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("oracle failure: {0}")]
    OracleFailure(String),
    #[error("no termination after {0} iterations")]
    NonTermination(usize),
    #[error("empty sample window")]
    EmptySampleWindow,
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("policy phase not initialized")]
    PhaseNotInitialized,
    #[error("product {0} is not offered")]
    ItemNotOffered(usize),
    #[error("tiny-instance guard violated: {0}")]
    GuardViolation(String),
    #[error("benchmark value must be positive, got {0}")]
    ZeroBenchmark(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
