use thiserror::Error;

/// Errors raised by construction and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("seed validation failed ({invariant}): {detail}")]
    SeedValidation { invariant: String, detail: String },
    #[error("not an immersion at {coords:?}: smallest singular value {sigma_min:e}")]
    NonImmersion { coords: Vec<f64>, sigma_min: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("finite-difference stencil leaves the domain at {0:?}")]
    StencilOutOfDomain(Vec<f64>),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("rank-two structure violated: {0}")]
    RankTwoStructure(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
