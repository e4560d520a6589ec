//! Expert buffer: greedy-search decisions on stratified states.

use linkforge_core::action::LinkConfig;
use linkforge_core::intent::PreferenceClass;
use linkforge_core::search::{evaluate_config, greedy_search};
use linkforge_core::{pref_to_weights, RewardWeights, ScenarioSet, SearchBudget};
use rayon::prelude::*;

use crate::data::DataRecord;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub record: DataRecord,
    pub action: LinkConfig,
    /// Mean reward of `action` over the expert's evaluation seeds.
    pub reward: f64,
}

/// Reward weights of a class's canonical preference.
pub fn class_weights(class: PreferenceClass) -> RewardWeights {
    pref_to_weights(&class.preference())
}

/// Runs greedy search on every record under its class's weights.
pub fn collect_expert(records: &[DataRecord], scenarios: &ScenarioSet, budget: &SearchBudget) -> Result<Vec<Experience>> {
    records
        .par_iter()
        .map(|r| {
            let ch = r.channel(scenarios)?;
            let res = greedy_search(&ch, &class_weights(r.class), budget)?;
            Ok(Experience {
                record: r.clone(),
                action: res.config,
                reward: res.reward,
            })
        })
        .collect()
}

/// Re-evaluates the stored action from the stored state and seeds.
pub fn replay_reward(exp: &Experience, scenarios: &ScenarioSet, budget: &SearchBudget) -> Result<f64> {
    let ch = exp.record.channel(scenarios)?;
    Ok(evaluate_config(&exp.action, &ch, &class_weights(exp.record.class), budget)?.reward)
}
