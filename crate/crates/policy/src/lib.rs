//! Preference-conditioned transformer policy over the link strategy
//! catalog, with the tape-based autodiff and optimizer it trains with.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod network;
pub mod params;

pub use error::{PolicyError, Result};
pub use graph::{Graph, NodeId, Tensor};
pub use network::{greedy_action, sample_action, Forward, Policy, PolicyInput, PolicyOutput};
pub use params::{Adam, ParamId, ParamStore};
