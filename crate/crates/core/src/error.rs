use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("outcome column `{0}` not found in header")]
    MissingOutcome(String),

    #[error("non-numeric value `{value}` in column `{column}` (data row {row})")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("only {0} complete rows remain; at least 2 are required")]
    TooFewRows(usize),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sampler diverged: {0}")]
    Divergence(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
