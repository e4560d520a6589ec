use linkforge_core::LinkError;
use linkforge_policy::PolicyError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss at step {step} ({stage}): {detail}")]
    NonFinite { step: usize, stage: &'static str, detail: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

pub type Result<T> = std::result::Result<T, TrainError>;
