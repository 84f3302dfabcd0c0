//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not symmetric (max asymmetry {max_asym:.3e})")]
    NotSymmetric { max_asym: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("singular matrix")]
    Singular,
    #[error("rank-deficient matrix")]
    RankDeficient,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("rank {r} out of range 1..={n}")]
    RankOutOfRange { r: usize, n: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("numerical saturation in {0}")]
    Saturation(&'static str),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("matrix logarithm did not converge (rotation angle too close to pi)")]
    LogNoConvergence,
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
