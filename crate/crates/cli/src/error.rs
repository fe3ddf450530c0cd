use std::path::PathBuf;

pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TRUNCATED: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_USAGE: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] sclqg_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use sclqg_core::Error as E;
        match self {
            CliError::Validation(_) | CliError::Format { .. } => EXIT_VALIDATION,
            CliError::Core(E::CapExceeded(_)) => EXIT_TRUNCATED,
            CliError::Core(
                E::ParameterOutOfRange(_)
                | E::InvalidResolution(_)
                | E::InvalidArgument(_)
                | E::Unsupported(_)
                | E::Ambiguous(_),
            ) => EXIT_VALIDATION,
            CliError::Core(E::Numerical(_) | E::Geometry(_)) => EXIT_INTERNAL,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
