use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Everything a command can fail with. Each variant maps to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("no such file: {}", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: unsupported format (expected {expected})", path.display())]
    UnsupportedFormat { path: PathBuf, expected: &'static str },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("invalid config key `{key}` in {}", path.display())]
    ConfigKey { path: PathBuf, key: String },
    #[error("template database is empty")]
    EmptyDatabase,
    #[error(transparent)]
    Core(ffd_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 1 usage or other, 2 IO, 3 size mismatch, 4 fit failure, 5 config key, 6 empty database.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotFound(_) | CliError::Io { .. } => 2,
            CliError::SizeMismatch(_) => 3,
            CliError::Fit(_) => 4,
            CliError::ConfigKey { .. } => 5,
            CliError::EmptyDatabase => 6,
            CliError::Core(ffd_core::Error::SizeMismatch { .. }) => 3,
            CliError::Core(ffd_core::Error::EmptyDatabase) => 6,
            _ => 1,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> CliError {
        if source.kind() == io::ErrorKind::NotFound {
            CliError::NotFound(path.to_path_buf())
        } else {
            CliError::Io { path: path.to_path_buf(), source }
        }
    }

    pub fn parse(path: &Path, line: usize, message: impl Into<String>) -> CliError {
        CliError::Parse { path: path.to_path_buf(), line, message: message.into() }
    }
}

impl From<ffd_core::Error> for CliError {
    fn from(e: ffd_core::Error) -> Self {
        match e {
            ffd_core::Error::EmptyDatabase => CliError::EmptyDatabase,
            ffd_core::Error::SizeMismatch { what, expected, found } => {
                CliError::SizeMismatch(format!("{what}: expected {expected}, found {found}"))
            }
            other => CliError::Core(other),
        }
    }
}

impl From<ffd_core::fit::FitFailure> for CliError {
    fn from(f: ffd_core::fit::FitFailure) -> Self {
        CliError::Fit(f.to_string())
    }
}
