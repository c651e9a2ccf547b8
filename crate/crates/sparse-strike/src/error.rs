use thiserror::Error;

/// Errors surfaced by the attack toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of bounds on axis `{axis}` (size {size})")]
    Bounds {
        axis: &'static str,
        index: usize,
        size: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value {value} outside pixel domain [0, 255]")]
    Domain { value: i64 },

    #[error("policy file parse error: {0}")]
    Parse(String),

    #[error("policy validation error: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("environment lifecycle error: {0}")]
    Lifecycle(String),

    #[error("trajectory format error: {0}")]
    Trajectory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
