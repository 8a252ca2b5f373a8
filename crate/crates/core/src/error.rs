use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A path value, bumped path or composed inner path left its open domain.
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("paths are not sampled on the same grid")]
    GridMismatch,

    #[error("time {0} is not a grid point")]
    NotGridPoint(f64),

    #[error("time {time} is not a point of the level-{level} partition")]
    NotPartitionPoint { time: f64, level: usize },

    #[error("level {level} out of range (finest available level is {max})")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("expression error: {0}")]
    Expression(String),

    /// The quadratic-variation identity required before an associativity
    /// check does not hold within tolerance.
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by reading, writing or parsing external input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Config(_)
                | Error::Expression(_)
                | Error::InvalidSpec(_)
                | Error::InvalidPath(_)
                | Error::LevelOutOfRange { .. }
        )
    }
}
