//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by blockstat operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series is empty")]
    EmptySeries,

    #[error("series value at index {index} is not finite ({value})")]
    NonFiniteValue { index: usize, value: f64 },

    #[error("block length {block_length} exceeds series length {n}")]
    BlockTooLong { block_length: usize, n: usize },

    #[error("invalid block length {0}: must be at least 1")]
    InvalidBlockLength(usize),

    #[error("moment order mismatch: expected {expected}, got {actual}")]
    MomentOrderMismatch { expected: usize, actual: usize },

    #[error("g is not defined at the moments of block {block} ({detail})")]
    DomainViolation { block: usize, detail: String },

    #[error("point outside the domain of g: {0}")]
    OutsideDomain(String),

    #[error("degenerate moment vector: v2 - v1^2 = {variance} is not positive")]
    DegenerateMoments { variance: f64 },

    #[error("need at least 2 blocks for a U-statistic, got {0}")]
    TooFewBlocks(usize),

    #[error("degenerate kernel: gamma^2 = {gamma_sq:e} is below the positivity tolerance")]
    DegenerateKernel { gamma_sq: f64 },

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("function is not square integrable under the standard normal law ({0})")]
    NonSquareIntegrable(String),

    #[error("method unavailable: {0}")]
    MethodUnavailable(String),

    #[error("long-run variance estimate is negative ({value}); lag window too short or too noisy")]
    NegativeEstimate { value: f64 },

    #[error("centering standard error {stderr:e} exceeds the limit {limit:e} for b_n = {blocks}")]
    CenteringTooNoisy {
        stderr: f64,
        limit: f64,
        blocks: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),
}

pub type Result<T> = std::result::Result<T, Error>;
