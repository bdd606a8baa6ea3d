use thiserror::Error;

use crate::field::SpaceId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("space mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: SpaceId, found: SpaceId },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("singular saddle system on {label}: constraint rank defect {rank_defect}")]
    SingularSaddle { label: String, rank_defect: usize },

    #[error("saddle solve on {label} missed its residual bounds (constraint {constraint:.3e}, stationarity {stationarity:.3e})")]
    SaddleResidual {
        label: String,
        constraint: f64,
        stationarity: f64,
    },

    #[error("line search failed at iteration {iteration}: step fell below {min_step:.1e}")]
    LineSearch { iteration: usize, min_step: f64 },

    #[error("phase alignment undefined: the two states are L2-orthogonal")]
    OrthogonalStates,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("corrupt file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
