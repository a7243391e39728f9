use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the surrogate pipeline.
#[derive(Debug, Error)]
pub enum SmcError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),

    #[error("column {0} not found in header")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} at row {row}")]
    NonNumeric { row: usize, value: String },

    #[error("missing value at row {0}")]
    MissingValue(usize),

    #[error("non-positive price at row {row}: {value}")]
    NonPositivePrice { row: usize, value: f64 },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("timestamps not strictly increasing at row {0}")]
    UnorderedTimestamps(usize),

    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate series: zero variance under the {0} transform")]
    ZeroVariance(&'static str),

    #[error("feature vectors differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("stale swap proposal: built for state version {proposal}, state is at {state}")]
    StaleProposal { proposal: u64, state: u64 },

    #[error("invalid config file: {0}")]
    Config(String),
}

pub type Result<T, E = SmcError> = std::result::Result<T, E>;

impl SmcError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SmcError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SmcError::InvalidArgument(msg.into())
    }
}
