use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", path.display())]
    Input {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] dsm_core::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// 3 for numerical failures, 2 for everything caused by the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    /// Attaches the file name to a line-numbered core error.
    pub fn in_file(path: &Path, e: dsm_core::Error) -> Self {
        match e {
            dsm_core::Error::MalformedRecord { line, message } => CliError::Input {
                path: path.to_path_buf(),
                line,
                message,
            },
            dsm_core::Error::Io(message) => CliError::Io {
                path: path.to_path_buf(),
                message,
            },
            other => CliError::Core(other),
        }
    }
}
