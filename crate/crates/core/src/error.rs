use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("truncation inadequate: population {population:.3e} above level {level} exceeds tail tolerance {tail_tol:.1e} (n_max = {n_max})")]
    TruncationInadequate {
        population: f64,
        level: usize,
        tail_tol: f64,
        n_max: usize,
    },

    #[error("density-matrix invariant violated: {0}")]
    InvalidState(String),

    #[error("quadrature with {nodes} nodes deviates from the analytic channel by {deviation:.3e}")]
    NodeCountInsufficient { nodes: usize, deviation: f64 },

    #[error("outcome density not normalized: integral {integral:.10} (tolerance {tolerance:.0e})")]
    NotNormalized { integral: f64, tolerance: f64 },

    #[error("unreliable estimate: {0}")]
    Unreliable(String),

    #[error("vanishing denominator in ratio {0}")]
    VanishingDenominator(&'static str),

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
