//! Stratified decision states: scenario, SNR, preference class, channel
//! seed and intent text.

use linkforge_core::channel::{csi_features, generate_channel, ChannelRealization, CsiFeatures};
use linkforge_core::intent::{generate_intent, tokenize, PreferenceClass};
use linkforge_core::{Result, ScenarioSet};
use linkforge_policy::PolicyInput;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SNR_GRID_DB: [f64; 11] = [-5.0, -2.5, 0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0];

#[derive(Debug, Clone, PartialEq)]
pub struct DataRecord {
    pub index: usize,
    pub scenario: String,
    pub snr_db: f64,
    pub class: PreferenceClass,
    pub channel_seed: u64,
    pub text: String,
    pub csi: CsiFeatures,
}

impl DataRecord {
    /// Builds a record, generating the channel to fill in the CSI.
    pub fn new(
        index: usize,
        scenarios: &ScenarioSet,
        scenario: &str,
        snr_db: f64,
        class: PreferenceClass,
        channel_seed: u64,
        text: String,
    ) -> Result<Self> {
        let sc = scenarios.get(scenario)?;
        let ch = generate_channel(sc, snr_db, channel_seed)?;
        Ok(Self {
            index,
            scenario: sc.name.clone(),
            snr_db,
            class,
            channel_seed,
            text,
            csi: csi_features(&ch),
        })
    }

    pub fn channel(&self, scenarios: &ScenarioSet) -> Result<ChannelRealization> {
        generate_channel(scenarios.get(&self.scenario)?, self.snr_db, self.channel_seed)
    }

    pub fn tokens(&self) -> Vec<u16> {
        tokenize(&self.text)
    }

    pub fn policy_input(&self) -> PolicyInput {
        PolicyInput {
            csi: self.csi.clone(),
            tokens: self.tokens(),
        }
    }
}

/// `n` records stratified over classes, scenarios and the SNR grid.
///
/// Record `i` has class `i % 3` and scenario `(i / 3) % S`. Within each
/// block of `3 * S * 11` records every (class, scenario) cell visits every
/// grid SNR exactly once, in a seeded random order.
pub fn generate_dataset(n: usize, scenarios: &ScenarioSet, seed: u64) -> Result<Vec<DataRecord>> {
    let names = scenarios.names();
    let cells = 3 * names.len();
    let block = cells * SNR_GRID_DB.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orders: Vec<Vec<usize>> = Vec::new();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let j = i % block;
        if j == 0 {
            orders = (0..cells)
                .map(|_| {
                    let mut o: Vec<usize> = (0..SNR_GRID_DB.len()).collect();
                    o.shuffle(&mut rng);
                    o
                })
                .collect();
        }
        let cell = j % cells;
        let class = PreferenceClass::ALL[i % 3];
        let scenario = names[(i / 3) % names.len()];
        let snr_db = SNR_GRID_DB[orders[cell][j / cells]];
        let channel_seed: u64 = rng.random();
        let text = generate_intent(class, scenario, rng.random()).text;
        out.push(DataRecord::new(i, scenarios, scenario, snr_db, class, channel_seed, text)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn blocks_cover_every_cell_and_snr_once() {
        let set = ScenarioSet::default();
        let data = generate_dataset(99, &set, 3).unwrap();
        let mut seen: HashMap<(String, PreferenceClass, i64), usize> = HashMap::new();
        for r in &data {
            *seen.entry((r.scenario.clone(), r.class, (r.snr_db * 10.0) as i64)).or_default() += 1;
        }
        assert_eq!(seen.len(), 99);
        assert!(seen.values().all(|&c| c == 1));
    }

    #[test]
    fn nine_records_cover_class_scenario_cells() {
        let data = generate_dataset(9, &ScenarioSet::default(), 0).unwrap();
        for class in PreferenceClass::ALL {
            assert_eq!(data.iter().filter(|r| r.class == class).count(), 3);
        }
        let mut cells: Vec<_> = data.iter().map(|r| (r.scenario.clone(), r.class)).collect();
        cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.index().cmp(&b.1.index())));
        cells.dedup();
        assert_eq!(cells.len(), 9);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let set = ScenarioSet::default();
        assert_eq!(generate_dataset(20, &set, 5).unwrap(), generate_dataset(20, &set, 5).unwrap());
        assert_ne!(generate_dataset(20, &set, 5).unwrap(), generate_dataset(20, &set, 6).unwrap());
    }
}
