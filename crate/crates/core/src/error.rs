use thiserror::Error;

/// Errors produced by the simulation, measurement and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for population of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no exact sampler for density family `{0}`")]
    UnsupportedSampler(String),

    #[error("time step violates stability bound: {0}")]
    StepTooLarge(String),

    #[error("cell index is stale: {0}")]
    StaleIndex(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("dictionary seeds are numerically dependent (scaled Gram condition number {0:e})")]
    IllConditioned(f64),

    #[error("time mismatch: population at t = {state}, field at t = {field}")]
    TimeMismatch { state: f64, field: f64 },

    #[error("trajectory must store every step (record stride is {0})")]
    StrideNotOne(usize),

    #[error("noise covariance is not positive semidefinite at t = {time} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { time: f64, min_eigenvalue: f64 },

    #[error("model assumption violated: {0}")]
    Assumption(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
