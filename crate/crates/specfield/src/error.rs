//! Error taxonomy mapped onto process exit codes:
//! 2 for user/config/data errors, 3 for numeric failures, 4 for I/O.

use std::path::PathBuf;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, malformed config/scene/data files, failed validation.
    #[error("{0}")]
    Usage(String),

    /// Malformed on-disk artifact.
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    /// Numeric failure (NaN loss, failed gradient check).
    #[error("{0}")]
    Numeric(String),

    /// Filesystem failure.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Format { .. } => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// Core errors are user/data errors except the numeric aborts.
    pub fn from_core(err: specfield_core::Error) -> Self {
        match err {
            specfield_core::Error::NanLoss { .. } => CliError::Numeric(err.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<specfield_core::Error> for CliError {
    fn from(err: specfield_core::Error) -> Self {
        CliError::from_core(err)
    }
}
