use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("unknown activation '{0}' (available: relu, elu, selu)")]
    UnknownActivation(String),

    #[error("unknown optimizer '{0}' (available: sgd, adam)")]
    UnknownOptimizer(String),

    #[error(
        "unknown dataset '{0}' (available: auto-mpg, heart-disease, compas, \
         blog-feedback, loan-defaulter, synthetic)"
    )]
    UnknownDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("csv error in {path} at data row {row}, column '{col}': {message}")]
    CsvCell {
        path: String,
        row: usize,
        col: String,
        message: String,
    },

    #[error("csv error in {path}: {message}")]
    CsvFile { path: String, message: String },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("non-finite gradient encountered during optimization")]
    NonFiniteGradient,

    #[error("unsupported model format version {0} (this build reads version 1)")]
    UnsupportedVersion(u64),

    #[error("malformed model file: {0}")]
    MalformedModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
