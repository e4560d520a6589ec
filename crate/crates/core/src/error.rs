use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("invalid SNR {0} dB (must be finite and within [-10, 30])")]
    InvalidSnr(f64),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("search space too large for exhaustive scan: {size} > {limit}")]
    SubsetTooLarge { size: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LinkError>;
