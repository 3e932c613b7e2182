use std::path::PathBuf;

use crate::access::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix failed validation: {0}")]
    InvalidMatrix(ValidationReport),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("K-Access did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    /// A centroid was absorbed by another centroid with unit accessibility,
    /// which only happens when two samples are duplicates of each other.
    #[error("centroid {centroid} was absorbed by centroid {absorbed_by}: duplicate states")]
    DuplicateStates { centroid: usize, absorbed_by: usize },

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
