use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DriftlabError>;

#[derive(Debug, Error)]
pub enum DriftlabError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-numeric value `{value}` in feature column `{column}` (row {row})")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dataset too small: {found} samples, need at least {needed}")]
    DatasetTooSmall { found: usize, needed: usize },
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl DriftlabError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DriftlabError::Io {
            path: path.into(),
            source,
        }
    }
}
