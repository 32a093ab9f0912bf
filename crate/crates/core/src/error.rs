use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),

    #[error("singular term in complexity parameter at cell (k={k}, l={l}): 1 - 2*gamma*h = 0")]
    SingularTerm { k: usize, l: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("target {target} unattainable: attainable interval is [{lo}, {hi}]")]
    Unattainable { target: f64, lo: f64, hi: f64 },

    #[error("degenerate sample: every variance in the profile is zero")]
    DegenerateSample,

    #[error("empty batch requested")]
    EmptyBatch,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("no crossing: {0}")]
    NoCrossing(String),

    #[error("degenerate crossing: {0}")]
    DegenerateCrossing(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
