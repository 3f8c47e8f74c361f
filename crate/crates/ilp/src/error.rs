use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IlpError {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("instance too large: {0}")]
    Size(String),

    #[error("simplex iteration limit ({0}) exceeded")]
    IterationLimit(usize),
}
