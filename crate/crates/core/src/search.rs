//! Strategy search baselines: uniform random selection, greedy
//! module-by-module search, beam search, and an exhaustive oracle for
//! small restricted catalogs.
//!
//! Every candidate is scored by the mean reward over the same fixed set of
//! Monte-Carlo seeds (`eval_seed_base .. eval_seed_base + mc_seeds`), so all
//! searches see paired noise and their results are directly comparable.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{ActionIndex, LinkConfig, SearchSpace, NUM_MODULES, SPACE_SIZE};
use crate::channel::ChannelRealization;
use crate::error::{LinkError, Result};
use crate::phy::{simulate_link, LinkMetrics, Payload};
use crate::reward::{normalize_metrics, reward, NormalizedTerms, RewardWeights};

/// Largest restricted catalog the exhaustive oracle accepts.
pub const EXHAUSTIVE_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    /// Monte-Carlo repetitions per candidate.
    pub mc_seeds: usize,
    pub eval_seed_base: u64,
    /// Information bits per simulated transmission.
    pub payload_bits: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            mc_seeds: 20,
            eval_seed_base: 0,
            payload_bits: 256,
        }
    }
}

impl SearchBudget {
    pub fn validate(&self) -> Result<()> {
        if self.mc_seeds == 0 {
            return Err(LinkError::Config("mc_seeds must be >= 1".into()));
        }
        if self.payload_bits == 0 || self.payload_bits % 8 != 0 {
            return Err(LinkError::Config("payload_bits must be a positive multiple of 8".into()));
        }
        Ok(())
    }

    pub fn with_seeds(self, mc_seeds: usize, eval_seed_base: u64) -> Self {
        Self {
            mc_seeds,
            eval_seed_base,
            ..self
        }
    }
}

/// Averages over the evaluation seeds for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub ber: f64,
    pub goodput: f64,
    pub complexity: f64,
    pub avg_transmissions: f64,
    pub reward: f64,
}

/// Scores configurations on one channel under fixed weights, memoizing
/// every configuration it has seen.
pub struct Evaluator<'a> {
    ch: &'a ChannelRealization,
    weights: RewardWeights,
    budget: SearchBudget,
    payloads: Vec<(u64, Payload)>,
    cache: HashMap<ActionIndex, f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(ch: &'a ChannelRealization, weights: RewardWeights, budget: SearchBudget) -> Result<Self> {
        budget.validate()?;
        reward(&NormalizedTerms::FLOOR, &weights)?;
        let payloads = (0..budget.mc_seeds as u64)
            .map(|i| {
                let seed = budget.eval_seed_base.wrapping_add(i);
                Payload::random(budget.payload_bits, seed).map(|p| (seed, p))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            ch,
            weights,
            budget,
            payloads,
            cache: HashMap::new(),
        })
    }

    pub fn budget(&self) -> &SearchBudget {
        &self.budget
    }

    /// Number of distinct configurations simulated so far.
    pub fn evaluations(&self) -> usize {
        self.cache.len()
    }

    fn run(&self, config: &LinkConfig) -> Evaluation {
        let n = self.payloads.len() as f64;
        let mut acc = Evaluation {
            ber: 0.0,
            goodput: 0.0,
            complexity: 0.0,
            avg_transmissions: 0.0,
            reward: 0.0,
        };
        for (seed, payload) in &self.payloads {
            let (m, r) = match simulate_link(config, self.ch, payload, *seed) {
                Ok(m) => {
                    let r = reward(&normalize_metrics(&m), &self.weights).unwrap();
                    (m, r)
                }
                // Infeasible configurations earn the reward floor.
                Err(_) => (
                    LinkMetrics {
                        ber: 1.0,
                        goodput: 0.0,
                        complexity: config.complexity_cost() as f64,
                        avg_transmissions: 1.0,
                    },
                    0.0,
                ),
            };
            acc.ber += m.ber;
            acc.goodput += m.goodput;
            acc.complexity += m.complexity;
            acc.avg_transmissions += m.avg_transmissions;
            acc.reward += r;
        }
        Evaluation {
            ber: acc.ber / n,
            goodput: acc.goodput / n,
            complexity: acc.complexity / n,
            avg_transmissions: acc.avg_transmissions / n,
            reward: acc.reward / n,
        }
    }

    /// Full averaged metrics (not cached).
    pub fn evaluate(&self, config: &LinkConfig) -> Evaluation {
        self.run(config)
    }

    /// Mean reward over the evaluation seeds.
    pub fn mean_reward(&mut self, idx: &ActionIndex) -> f64 {
        if let Some(&r) = self.cache.get(idx) {
            return r;
        }
        let config = LinkConfig::from_indices(idx).expect("search produced a valid index");
        let r = self.run(&config).reward;
        self.cache.insert(*idx, r);
        r
    }
}

/// Averaged metrics of one configuration on one channel.
pub fn evaluate_config(
    config: &LinkConfig,
    ch: &ChannelRealization,
    weights: &RewardWeights,
    budget: &SearchBudget,
) -> Result<Evaluation> {
    Ok(Evaluator::new(ch, *weights, *budget)?.evaluate(config))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub config: LinkConfig,
    /// Evaluated mean reward of `config`.
    pub reward: f64,
}

/// Uniform draw from the whole configuration space.
pub fn random_select(seed: u64) -> LinkConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LinkConfig::from_ordinal(rng.random_range(0..SPACE_SIZE)).unwrap()
}

/// Higher reward first, then lexicographically smaller index.
fn rank(a: &(ActionIndex, f64), b: &(ActionIndex, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

pub fn greedy_search(
    ch: &ChannelRealization,
    w: &RewardWeights,
    budget: &SearchBudget,
) -> Result<SearchResult> {
    greedy_search_in(&SearchSpace::full(), ch, w, budget)
}

/// Sweeps the modules in catalog order, fixing each to its best option with
/// the others held at their current values (initially the first allowed
/// option). Ties go to the lowest option index.
pub fn greedy_search_in(
    space: &SearchSpace,
    ch: &ChannelRealization,
    w: &RewardWeights,
    budget: &SearchBudget,
) -> Result<SearchResult> {
    let mut eval = Evaluator::new(ch, *w, *budget)?;
    greedy_with(space, &mut eval)
}

pub fn greedy_with(space: &SearchSpace, eval: &mut Evaluator<'_>) -> Result<SearchResult> {
    let mut current = space.initial();
    let mut best_reward = f64::NEG_INFINITY;
    for m in 0..NUM_MODULES {
        let mut best: Option<(ActionIndex, f64)> = None;
        for &opt in space.allowed(m) {
            let mut cand = current;
            cand[m] = opt;
            let r = eval.mean_reward(&cand);
            let entry = (cand, r);
            if best.as_ref().is_none_or(|b| rank(&entry, b) == Ordering::Less) {
                best = Some(entry);
            }
        }
        let (idx, r) = best.expect("every module has an allowed option");
        current = idx;
        best_reward = r;
    }
    Ok(SearchResult {
        config: LinkConfig::from_indices(&current)?,
        reward: best_reward,
    })
}

pub fn beam_search(
    ch: &ChannelRealization,
    w: &RewardWeights,
    width: usize,
    budget: &SearchBudget,
) -> Result<SearchResult> {
    beam_search_in(&SearchSpace::full(), ch, w, width, budget)
}

/// Expands modules in catalog order, keeping the `width` best partial
/// configurations; unset modules sit at their first allowed option while a
/// partial configuration is scored.
pub fn beam_search_in(
    space: &SearchSpace,
    ch: &ChannelRealization,
    w: &RewardWeights,
    width: usize,
    budget: &SearchBudget,
) -> Result<SearchResult> {
    let mut eval = Evaluator::new(ch, *w, *budget)?;
    beam_with(space, width, &mut eval)
}

pub fn beam_with(space: &SearchSpace, width: usize, eval: &mut Evaluator<'_>) -> Result<SearchResult> {
    if width == 0 {
        return Err(LinkError::Config("beam width must be >= 1".into()));
    }
    let mut beam: Vec<(ActionIndex, f64)> = vec![(space.initial(), f64::NEG_INFINITY)];
    for m in 0..NUM_MODULES {
        let mut candidates: Vec<(ActionIndex, f64)> = Vec::with_capacity(beam.len() * space.allowed(m).len());
        for (parent, _) in &beam {
            for &opt in space.allowed(m) {
                let mut cand = *parent;
                cand[m] = opt;
                candidates.push((cand, eval.mean_reward(&cand)));
            }
        }
        candidates.sort_by(rank);
        candidates.dedup_by(|a, b| a.0 == b.0);
        candidates.truncate(width);
        beam = candidates;
    }
    let (idx, reward) = beam[0];
    Ok(SearchResult {
        config: LinkConfig::from_indices(&idx)?,
        reward,
    })
}

/// Exact argmax over a restricted catalog of at most [`EXHAUSTIVE_LIMIT`]
/// configurations, ties to the lexicographically smallest index.
pub fn exhaustive_oracle(
    ch: &ChannelRealization,
    w: &RewardWeights,
    space: &SearchSpace,
    budget: &SearchBudget,
) -> Result<SearchResult> {
    let size = space.size();
    if size > EXHAUSTIVE_LIMIT {
        return Err(LinkError::SubsetTooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let mut eval = Evaluator::new(ch, *w, *budget)?;
    let best = space
        .enumerate()
        .into_iter()
        .map(|idx| (idx, eval.mean_reward(&idx)))
        .min_by(rank)
        .expect("non-empty space");
    Ok(SearchResult {
        config: LinkConfig::from_indices(&best.0)?,
        reward: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Module;
    use crate::channel::{generate_channel, Scenario};
    use crate::reward::PreferenceVector;
    use crate::reward::pref_to_weights;

    fn small_budget() -> SearchBudget {
        SearchBudget {
            mc_seeds: 4,
            eval_seed_base: 100,
            payload_bits: 64,
        }
    }

    #[test]
    fn random_select_is_deterministic_and_spread() {
        assert_eq!(random_select(17), random_select(17));
        let distinct: std::collections::HashSet<_> = (0..50).map(random_select).collect();
        assert!(distinct.len() > 45);
    }

    #[test]
    fn budget_validation() {
        let ch = ChannelRealization::flat(5.0).unwrap();
        let w = pref_to_weights(&PreferenceVector::uniform());
        let bad = SearchBudget { mc_seeds: 0, ..small_budget() };
        assert!(greedy_search(&ch, &w, &bad).is_err());
        let bad = SearchBudget { payload_bits: 12, ..small_budget() };
        assert!(greedy_search(&ch, &w, &bad).is_err());
        assert!(beam_search(&ch, &w, 0, &small_budget()).is_err());
    }

    #[test]
    fn single_module_greedy_is_exhaustive() {
        let ch = generate_channel(&Scenario::urban(), 4.0, 3).unwrap();
        let w = pref_to_weights(&PreferenceVector::uniform());
        let space = SearchSpace::around(&LinkConfig::default(), &[Module::Modulation]);
        let g = greedy_search_in(&space, &ch, &w, &small_budget()).unwrap();
        let o = exhaustive_oracle(&ch, &w, &space, &small_budget()).unwrap();
        assert_eq!(g, o);
    }

    #[test]
    fn oracle_rejects_large_space() {
        let ch = ChannelRealization::flat(5.0).unwrap();
        let w = pref_to_weights(&PreferenceVector::uniform());
        assert!(matches!(
            exhaustive_oracle(&ch, &w, &SearchSpace::full(), &small_budget()),
            Err(LinkError::SubsetTooLarge { .. })
        ));
    }

    #[test]
    fn one_option_catalog_returns_it() {
        let ch = ChannelRealization::flat(5.0).unwrap();
        let w = pref_to_weights(&PreferenceVector::uniform());
        let only = LinkConfig::from_indices(&[3, 1, 1, 2, 0, 1, 0, 1]).unwrap();
        let space = SearchSpace::around(&only, &[]);
        assert_eq!(space.size(), 1);
        for r in [
            exhaustive_oracle(&ch, &w, &space, &small_budget()).unwrap(),
            greedy_search_in(&space, &ch, &w, &small_budget()).unwrap(),
            beam_search_in(&space, &ch, &w, 3, &small_budget()).unwrap(),
        ] {
            assert_eq!(r.config, only);
        }
    }

    #[test]
    fn memoization_counts_distinct_configs() {
        let ch = ChannelRealization::flat(5.0).unwrap();
        let w = pref_to_weights(&PreferenceVector::uniform());
        let mut eval = Evaluator::new(&ch, w, small_budget()).unwrap();
        greedy_with(&SearchSpace::full(), &mut eval).unwrap();
        // 26 candidates, the incumbent is re-proposed by each of the 7 later modules.
        assert_eq!(eval.evaluations(), 26 - 7);
    }
}
