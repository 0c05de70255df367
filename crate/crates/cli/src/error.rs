use std::path::PathBuf;

use tctn_core::TctnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] TctnError),

    #[error("cannot use {what} {}: {source}", path.display())]
    File {
        what: &'static str,
        path: PathBuf,
        source: TctnError,
    },

    #[error("missing {0:?}: set it in the config file or pass --set {0}=<path>")]
    MissingKey(&'static str),

    #[error("--set expects key=value, got {0:?}")]
    BadOverride(String),

    #[error("gradient check failed: relative error {error:e} in {worst} exceeds {tolerance:e}")]
    GradcheckFailed {
        error: f64,
        worst: String,
        tolerance: f64,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_GRADCHECK: u8 = 5;

fn core_code(e: &TctnError) -> u8 {
    match e {
        TctnError::Config(_) | TctnError::Argument(_) => EXIT_CONFIG,
        TctnError::Io(_) | TctnError::Format(_) | TctnError::Length { .. } | TctnError::Data(_) => {
            EXIT_DATA
        }
        TctnError::Numeric { .. } => EXIT_NUMERIC,
        TctnError::Shape(_) | TctnError::InvalidState(_) | TctnError::InvalidOracle(_) => {
            EXIT_INTERNAL
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => core_code(e),
            CliError::File { source, .. } => match core_code(source) {
                EXIT_INTERNAL => EXIT_DATA,
                code => code,
            },
            CliError::MissingKey(_) | CliError::BadOverride(_) => EXIT_CONFIG,
            CliError::GradcheckFailed { .. } => EXIT_GRADCHECK,
        }
    }
}

pub(crate) fn io_err(e: std::io::Error) -> CliError {
    CliError::Core(TctnError::Io(e))
}
