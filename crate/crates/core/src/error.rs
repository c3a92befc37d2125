use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected length {expected}, found {found}")]
    InputShape { expected: usize, found: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("cannot compare representations across models `{left}` and `{right}`")]
    CrossModel { left: String, right: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("salient set carries vanishing mass (1 - t = {0:e})")]
    DegenerateMass(f64),

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("validation failed at {location}: {message}")]
    Validation { location: String, message: String },

    #[error("missing conductance bundles: {}", .0.join(", "))]
    Coverage(Vec<String>),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
