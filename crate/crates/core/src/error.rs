//! Error taxonomy shared across the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad spec, weights, paths, ranges).
    #[error("configuration error: {0}")]
    Config(String),

    /// Dataset schema does not match the file or is internally inconsistent.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell could not be parsed with its declared kind.
    #[error("parse error at row {row}, column \"{column}\": {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Matrix/vector dimensions do not chain.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Training diverged or failed.
    #[error("training failed at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// Non-finite value encountered during numeric evaluation.
    #[error("numerical error at sample {index}: {message}")]
    NonFinite { index: usize, message: String },

    /// Label stratification impossible.
    #[error("stratification error: {0}")]
    Stratification(String),

    /// A required sensitive group is absent.
    #[error("grouping error: {0}")]
    Grouping(String),

    /// Raw metric value outside the domain of its normalization rule.
    #[error("normalization error for metric \"{metric}\": value {value} outside rule domain")]
    Normalization { metric: String, value: f64 },

    /// Score aggregation over an empty or inconsistent record set.
    #[error("aggregation error: {0}")]
    Aggregation(String),

    /// Malformed input document (replay JSON, report JSON).
    #[error("input error at {pointer}: {message}")]
    Input { pointer: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
