use thiserror::Error;

/// Errors raised across geometry, smoothing, estimation and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is numerically singular: eigenvalue {eigenvalue:e} is below the floor {floor:e}")]
    Singular { eigenvalue: f64, floor: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no positive kernel weight at anchor {anchor}; bandwidth {bandwidth} is too small")]
    DegenerateNeighborhood { anchor: usize, bandwidth: f64 },

    #[error("local Gram matrix is rank deficient at anchor {anchor}")]
    RankDeficient { anchor: usize },

    #[error("Frechet mean iteration did not converge after {iterations} steps (last iterate {last:?})")]
    NonConvergence { iterations: usize, last: [f64; 3] },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("data generation failed: {0}")]
    Generation(String),

    #[error("dimension selection failed: {0}")]
    Selection(String),
}

pub type Result<T> = std::result::Result<T, Error>;
