use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cdpd::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: invalid JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_STUDY: u8 = 4;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        let code = match self {
            CliError::Core(cdpd::Error::StudyFailure { .. }) => EXIT_STUDY,
            CliError::Core(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Core(_) => EXIT_NUMERICAL,
            CliError::Usage(_) | CliError::Io { .. } | CliError::Json { .. } => EXIT_VALIDATION,
        };
        ExitCode::from(code)
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
