use thiserror::Error;

/// Errors produced by parameter validation, solvers and simulators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("truncated state space too large: {dim} states (limit {limit})")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("truncation diagnostic {found:.3e} above threshold {threshold:.3e}; result refused")]
    Truncation { found: f64, threshold: f64 },

    #[error("simulation aborted: {0}")]
    Simulation(String),

    #[error("estimate unavailable: {0}")]
    Estimate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
