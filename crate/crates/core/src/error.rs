use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error at line {line}: field `{field}` has invalid value `{value}`")]
    Schema {
        line: u64,
        field: String,
        value: String,
    },

    #[error("invalid record: field `{field}` has invalid value `{value}`")]
    InvalidRecord { field: String, value: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown cohort tag `{0}`")]
    UnknownCohort(String),

    #[error("column `{0}` has zero deviation and cannot be standardized")]
    ZeroDeviation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular design: {0}")]
    Singular(String),

    #[error("{method} did not converge after {iterations} iterations")]
    NonConvergence { method: String, iterations: usize },

    #[error("non-finite value at iteration {iteration}: {message}")]
    NonFinite { iteration: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
