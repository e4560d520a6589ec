//! Side-by-side evaluation of the selection methods on fixed states.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use linkforge_core::action::LinkConfig;
use linkforge_core::intent::{generate_intent, PreferenceClass};
use linkforge_core::search::{beam_search, evaluate_config, greedy_search, random_select};
use linkforge_core::{ScenarioSet, SearchBudget};
use linkforge_policy::Policy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{DataRecord, SNR_GRID_DB};
use crate::error::{Result, TrainError};
use crate::expert::class_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Random,
    Greedy,
    Beam3,
    Policy,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Random, Method::Greedy, Method::Beam3, Method::Policy];

    pub fn label(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Greedy => "greedy",
            Method::Beam3 => "beam3",
            Method::Policy => "policy",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown method `{s}` (expected random, greedy, beam3 or policy)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub scenario: String,
    pub snr_db: f64,
    pub class: PreferenceClass,
    pub method: Method,
    pub config: LinkConfig,
    pub ber: f64,
    pub goodput: f64,
    pub complexity: f64,
    pub reward: f64,
    /// Decision time; only recorded on request so that outputs stay
    /// reproducible.
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Budget the search baselines decide with.
    pub search_budget: SearchBudget,
    /// Seeds every decision is scored on.
    pub report_budget: SearchBudget,
    pub timing: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            search_budget: SearchBudget::default(),
            report_budget: SearchBudget {
                mc_seeds: 100,
                eval_seed_base: 1 << 40,
                payload_bits: 256,
            },
            timing: false,
        }
    }
}

/// Every (scenario, grid SNR, class) state once, in that nesting order.
pub fn eval_grid(scenarios: &ScenarioSet, seed: u64) -> Result<Vec<DataRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for sc in scenarios.scenarios() {
        for &snr in &SNR_GRID_DB {
            for class in PreferenceClass::ALL {
                let text = generate_intent(class, &sc.name, rng.random()).text;
                let r = DataRecord::new(out.len(), scenarios, &sc.name, snr, class, rng.random(), text)?;
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// The configuration `method` picks for `record`. The random baseline is
/// seeded from the record's channel seed.
pub fn decide(
    method: Method,
    record: &DataRecord,
    scenarios: &ScenarioSet,
    policy: Option<&Policy>,
    search_budget: &SearchBudget,
) -> Result<LinkConfig> {
    let w = class_weights(record.class);
    Ok(match method {
        Method::Random => random_select(record.channel_seed),
        Method::Greedy => greedy_search(&record.channel(scenarios)?, &w, search_budget)?.config,
        Method::Beam3 => beam_search(&record.channel(scenarios)?, &w, 3, search_budget)?.config,
        Method::Policy => {
            let p = policy.ok_or_else(|| TrainError::Config("policy method needs a checkpoint".into()))?;
            p.infer_one(&record.policy_input())?.greedy_action()
        }
    })
}

/// Decides and scores every (record, method) pair; rows come out in
/// record-major, method-minor order.
pub fn evaluate(
    records: &[DataRecord],
    methods: &[Method],
    policy: Option<&Policy>,
    scenarios: &ScenarioSet,
    opts: &EvalOptions,
) -> Result<Vec<EvalRecord>> {
    let jobs: Vec<(&DataRecord, Method)> = records
        .iter()
        .flat_map(|r| methods.iter().map(move |&m| (r, m)))
        .collect();
    jobs.par_iter()
        .map(|&(r, m)| {
            let start = Instant::now();
            let config = decide(m, r, scenarios, policy, &opts.search_budget)?;
            let elapsed = start.elapsed().as_secs_f64();
            let ch = r.channel(scenarios)?;
            let ev = evaluate_config(&config, &ch, &class_weights(r.class), &opts.report_budget)?;
            Ok(EvalRecord {
                scenario: r.scenario.clone(),
                snr_db: r.snr_db,
                class: r.class,
                method: m,
                config,
                ber: ev.ber,
                goodput: ev.goodput,
                complexity: ev.complexity,
                reward: ev.reward,
                wall_time_s: opts.timing.then_some(elapsed),
            })
        })
        .collect()
}

/// Mean reward of the rows produced by `method`.
pub fn mean_reward(rows: &[EvalRecord], method: Method) -> f64 {
    let rs: Vec<f64> = rows.iter().filter(|r| r.method == method).map(|r| r.reward).collect();
    rs.iter().sum::<f64>() / rs.len().max(1) as f64
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
