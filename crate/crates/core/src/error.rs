use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("volume {volume} exceeds the configured cap of {cap} sites")]
    VolumeCap { volume: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose")]
    Asymmetric { row: usize, col: usize },

    #[error("eigensolver did not converge after {iterations} iterations (dimension {dim})")]
    NoConvergence { iterations: usize, dim: usize },

    #[error("eigenvectors were not computed")]
    MissingVectors,

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
