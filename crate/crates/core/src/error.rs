use thiserror::Error;

use crate::mdp::ValidationReport;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(ValidationReport),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("horizon must be at least 1 (got {0})")]
    InvalidHorizon(usize),

    #[error("temperature must be positive (got {0})")]
    InvalidTemperature(f64),

    #[error("entropy weight c = 0 has no soft-optimal backup; use optimal_q instead")]
    ZeroEntropyWeight,

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("oracles disagree by {0:e}")]
    OracleDisagreement(f64),

    #[error("singular linear system")]
    SingularSystem,

    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,

    #[error("trajectory segment is empty")]
    EmptySegment,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
