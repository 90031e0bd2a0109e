use thiserror::Error;

/// Errors produced by the shared-control engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid interface: {0}")]
    InvalidInterface(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate projection: displacement {0} between horizons is too small")]
    DegenerateProjection(f64),

    #[error("inference accuracy undefined: no step with nonzero human input")]
    UndefinedAccuracy,
}

pub type Result<T> = std::result::Result<T, Error>;
