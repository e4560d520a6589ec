use linkforge_core::LinkError;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("token id {0} outside the vocabulary")]
    TokenOutOfRange(u16),
    #[error("invalid state: {0}")]
    State(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint built for catalog {found:016x}, this build uses {expected:016x}")]
    Fingerprint { expected: u64, found: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Link(#[from] LinkError),
}

pub type Result<T> = std::result::Result<T, PolicyError>;
