use thiserror::Error;

/// Stable exit-code contract: 0 success, 1 usage or validation, 2
/// verification failure, 3 numerical failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Verification(String),

    #[error("{0}")]
    Numerical(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
