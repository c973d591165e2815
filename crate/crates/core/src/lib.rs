//! Anatomization-based privacy protection for tabular training data and
//! k-nearest-neighbor evaluation on original, anatomized, and
//! generalization-anonymized data, together with the error-rate
//! formulas, bounds, and convergence model that describe it.

pub mod anatomy;
pub mod dataset;
pub mod experiments;
pub mod generalize;
pub mod knn;
pub mod numeric;
pub mod theory;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("anatomization error: {0}")]
    Anatomy(String),
    #[error("generalization error: {0}")]
    Generalization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Version stamp written into every emitted report.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
