use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// An input violates a domain invariant. `context` names the scenario or
    /// configuration object, `field` the offending field.
    #[error("invalid {context}: {field}: {message}")]
    Validation {
        context: String,
        field: String,
        message: String,
    },

    #[error("{what} out of range: {value} not in {lo}..={hi}")]
    Range {
        what: &'static str,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("model build failed in family {family}: {message}")]
    Build { family: String, message: String },

    #[error("instance too large for enumeration: {0}")]
    Refused(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(
        context: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            context: context.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
