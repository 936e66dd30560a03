use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial degree must be at least 1, got {0}")]
    InvalidDegree(usize),

    #[error("invalid time interval [{t0}, {tf}]")]
    InvalidInterval { t0: f64, tf: f64 },

    #[error("time {t} lies outside the grid interval [{t0}, {tf}]")]
    OutOfInterval { t: f64, t0: f64, tf: f64 },

    #[error("Chebyshev argument {0} lies outside [-1, 1]")]
    OutOfDomain(f64),

    #[error("empty input")]
    Empty,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rotation vector norm {0} leaves the exponential chart")]
    ChartViolation(f64),

    #[error("landmark behind camera (depth {depth:.4} m)")]
    Cheirality { depth: f64 },

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered at t = {0}")]
    NonFinite(f64),

    #[error("underdetermined fit: {samples} samples for {unknowns} unknowns")]
    Underdetermined { samples: usize, unknowns: usize },

    #[error("insufficient observations: {0}")]
    InsufficientObservations(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
