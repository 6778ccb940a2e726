use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error(transparent)]
    Core(#[from] gpaco_core::CoreError),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at step {step}")]
    NumericalFailure { step: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, TrainerError>;
