use std::path::PathBuf;

use osfield::FieldError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing required field `{0}`")]
    Missing(&'static str),

    #[error(transparent)]
    Field(#[from] FieldError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for bad input, 3 for numerical or certification failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Field(FieldError::Numeric(_) | FieldError::Certification { .. }) => 3,
            _ => 2,
        }
    }
}

pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
