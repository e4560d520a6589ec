//! Physical-layer link simulator and strategy catalog.
//!
//! * [`channel`]: tapped-delay-line fading channels and CSI features.
//! * [`phy`]: the end-to-end transmission chain and its metrics.
//! * [`action`]: per-module strategy options, costs and rates.
//! * [`reward`]: metric normalization and preference-weighted reward.
//! * [`search`]: random, greedy, beam and exhaustive strategy search.
//! * [`intent`]: templated user intents and the tokenizer.

pub mod action;
pub mod channel;
pub mod error;
pub mod intent;
pub mod phy;
pub mod reward;
pub mod search;

pub use action::{LinkConfig, Module, SearchSpace};
pub use channel::{csi_features, generate_channel, ChannelRealization, CsiFeatures, Scenario, ScenarioSet};
pub use error::{LinkError, Result};
pub use intent::{IntentSample, PreferenceClass};
pub use phy::{simulate_link, LinkMetrics, Payload};
pub use reward::{normalize_metrics, pref_to_weights, reward, PreferenceVector, RewardWeights};
pub use search::{SearchBudget, SearchResult};
