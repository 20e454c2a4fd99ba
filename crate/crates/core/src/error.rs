use thiserror::Error;

/// Errors raised across ingestion, fitting, screening and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate measurement for subject {subject} at time {time}")]
    DuplicateMeasurement { subject: String, time: f64 },

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("time basis needs at least two distinct times, got {0}")]
    EmptyTimeBasis(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for {len} variables")]
    Index { index: usize, len: usize },

    #[error("unbalanced data: {0}")]
    Unbalanced(String),

    #[error("variance parameters outside their domain: {0}")]
    VarianceDomain(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("design is rank deficient (offending columns: {columns:?})")]
    RankDeficient { columns: Vec<usize> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the input data or configuration rather than
    /// by numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DuplicateMeasurement { .. }
                | Error::Parse { .. }
                | Error::Schema(_)
                | Error::EmptyTimeBasis(_)
                | Error::Shape(_)
                | Error::Index { .. }
                | Error::Unbalanced(_)
                | Error::Domain(_)
                | Error::Config(_)
                | Error::InvalidData(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
