use std::path::PathBuf;

use rulematrix_core::error::OracleFailure;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] rulematrix_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: unknown category `{value}` in column `{column}`")]
    UnknownCategory { row: usize, column: String, value: String },
    #[error("row {row}: non-numeric value `{value}` in column `{column}`")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("bad teacher spec `{0}`")]
    BadTeacher(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("port in use: {0}")]
    PortInUse(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn oracle(kind: OracleFailure, message: impl Into<String>) -> Self {
        Error::Core(rulematrix_core::Error::Oracle { kind, message: message.into() })
    }

    /// Whether the error stems from user input rather than an internal fault.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::Core(rulematrix_core::Error::Divergence { .. } | rulematrix_core::Error::Oracle { .. })
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
