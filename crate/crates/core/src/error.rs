use thiserror::Error;

/// Errors surfaced by the contrastive-learning core.
#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    #[error("degenerate feature: cannot normalize a zero-norm vector")]
    DegenerateFeature,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("class {0} has zero count; priors must be strictly positive")]
    ZeroClassCount(usize),

    #[error("push of {pushed} entries exceeds queue capacity {capacity}")]
    QueueOverflow { pushed: usize, capacity: usize },

    #[error("contrast set A(i) is empty")]
    EmptyContrastSet,

    #[error("decomposition requires nonempty A(i) and P(i)")]
    EmptyDecomposition,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
