//! Training pipeline for the strategy policy: stratified state
//! generation, greedy-expert collection, behavior cloning, REINFORCE
//! fine-tuning and method comparison.

pub mod data;
pub mod error;
pub mod eval;
pub mod expert;
pub mod train;

pub use data::{generate_dataset, DataRecord, SNR_GRID_DB};
pub use error::{Result, TrainError};
pub use eval::{evaluate, EvalOptions, EvalRecord, Method};
pub use expert::{collect_expert, Experience};
pub use train::{bc_loss, pref_loss, rl_step, train, LogRecord, Stage, TrainConfig, TrainOutcome};
