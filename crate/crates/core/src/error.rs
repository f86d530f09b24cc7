use alloc::string::String;

/// Failure category for oracles that live outside the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleFailure {
    HandshakeFailure,
    ProtocolViolation,
    OracleTimeout,
    Io,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("row {row}: invalid value for feature `{feature}`")]
    InvalidValue { row: usize, feature: String },
    #[error("schema mismatch: expected {expected} values per instance, got {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("split would leave an empty partition (n={n}, test_fraction={fraction})")]
    DegenerateSplit { n: usize, fraction: f64 },
    #[error("no data")]
    NoData,
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("empty transaction set")]
    EmptyTransactionSet,
    #[error("empty candidate pool")]
    EmptyPool,
    #[error("data filter selects no instances")]
    EmptySelection,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("oracle failure ({kind:?}): {message}")]
    Oracle { kind: OracleFailure, message: String },
}

pub type Result<T> = core::result::Result<T, Error>;
