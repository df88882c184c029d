use std::path::{Path, PathBuf};

use thiserror::Error;

/// Exit status for a malformed config or invalid arguments (`EX_USAGE`).
pub const EXIT_MALFORMED: i32 = 64;
/// Exit status for an unreadable trace or report (`EX_DATAERR`).
pub const EXIT_DATA: i32 = 65;
/// Exit status when an input glob matches nothing (`EX_NOINPUT`).
pub const EXIT_NO_INPUT: i32 = 66;
/// Exit status for an internal numerical failure (`EX_SOFTWARE`).
pub const EXIT_SOFTWARE: i32 = 70;
/// Exit status for a read or write failure (`EX_IOERR`).
pub const EXIT_IO: i32 = 74;
/// Exit status when admissibility fails and no override was given.
pub const EXIT_INADMISSIBLE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema or value error; `key` is the dotted path of the offending entry.
    #[error("invalid config at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// An input file that is not a valid trace.
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("no files match `{0}`")]
    EmptyGlob(String),

    #[error("{0}")]
    Inadmissible(String),

    #[error(transparent)]
    Core(#[from] asgd_core::Error),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => EXIT_MALFORMED,
            CliError::Io { .. } => EXIT_IO,
            CliError::Data { .. } => EXIT_DATA,
            CliError::EmptyGlob(_) => EXIT_NO_INPUT,
            CliError::Inadmissible(_) => EXIT_INADMISSIBLE,
            CliError::Core(asgd_core::Error::Inadmissible(_)) => EXIT_INADMISSIBLE,
            CliError::Core(_) => EXIT_SOFTWARE,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
