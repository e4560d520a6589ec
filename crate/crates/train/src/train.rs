//! Two-stage training: behavior cloning on the expert buffer, then
//! REINFORCE fine-tuning with the cloning loss annealed out.

use std::fmt;

use linkforge_core::action::{ActionIndex, LinkConfig, NUM_MODULES};
use linkforge_core::channel::ChannelRealization;
use linkforge_core::search::evaluate_config;
use linkforge_core::{ScenarioSet, SearchBudget};
use linkforge_policy::network::{argmax, sample_action};
use linkforge_policy::{Adam, Forward, Graph, NodeId, Policy, PolicyInput};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};
use crate::expert::{class_weights, Experience};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub bc_epochs: usize,
    pub rl_steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub entropy_coef: f64,
    pub baseline_decay: f64,
    /// Global gradient-norm clip; 0 disables.
    pub clip_norm: f64,
    pub seed: u64,
    /// Budget of the greedy expert.
    pub expert_budget: SearchBudget,
    /// Budget of each reward simulation in the RL stage. Its seed base is
    /// advanced every step so that no two steps share noise.
    pub rl_budget: SearchBudget,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            bc_epochs: 10,
            rl_steps: 5000,
            batch_size: 32,
            lr: 1e-3,
            lambda_start: 1.0,
            lambda_end: 0.1,
            entropy_coef: 0.01,
            baseline_decay: 0.9,
            clip_norm: 1.0,
            seed: 0,
            expert_budget: SearchBudget::default(),
            rl_budget: SearchBudget {
                mc_seeds: 4,
                eval_seed_base: 1 << 32,
                payload_bits: 128,
            },
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        for l in [self.lambda_start, self.lambda_end] {
            if !(0.0..=1.0).contains(&l) {
                return bad("lambda must lie in [0, 1]");
            }
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return bad("entropy_coef must be non-negative");
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad("baseline_decay must lie in [0, 1)");
        }
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return bad("clip_norm must be non-negative");
        }
        self.expert_budget.validate()?;
        self.rl_budget.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cloning-loss weight at RL step `step`: linear from `lambda_start`
    /// at step 0 to `lambda_end` at the last step.
    pub fn lambda(&self, step: usize) -> f64 {
        if self.rl_steps <= 1 {
            return self.lambda_start;
        }
        let t = step.min(self.rl_steps - 1) as f64 / (self.rl_steps - 1) as f64;
        self.lambda_start * (1.0 - t) + self.lambda_end * t
    }

    fn optimizer(&self, policy: &Policy) -> Adam {
        let mut opt = Adam::new(policy.store(), self.lr);
        opt.clip_norm = (self.clip_norm > 0.0).then_some(self.clip_norm);
        opt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Bc,
    Rl,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Bc => "bc",
            Stage::Rl => "rl",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One metrics-log line. `objective` and `mean_reward` exist only for RL
/// steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub step: usize,
    pub stage: Stage,
    pub bc_loss: f64,
    pub pref_loss: f64,
    pub objective: Option<f64>,
    pub mean_reward: Option<f64>,
    pub pref_acc: f64,
    pub lambda: f64,
}

fn opt_field(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl LogRecord {
    pub const HEADER: &'static str = "step\tstage\tL_BC\tL_pref\tJ\tmean_reward\tpref_acc\tlambda";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.step,
            self.stage,
            self.bc_loss,
            self.pref_loss,
            opt_field(self.objective),
            opt_field(self.mean_reward),
            self.pref_acc,
            self.lambda
        )
    }
}

/// Per-class exponential moving average of rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub decay: f64,
    values: [Option<f64>; 3],
}

impl Baseline {
    pub fn new(decay: f64) -> Self {
        Self { decay, values: [None; 3] }
    }

    pub fn get(&self, class: usize) -> Option<f64> {
        self.values[class]
    }

    /// Folds in one observation; the first observation initializes.
    pub fn update(&mut self, class: usize, r: f64) {
        self.values[class] = Some(match self.values[class] {
            Some(b) => self.decay * b + (1.0 - self.decay) * r,
            None => r,
        });
    }
}

struct Losses {
    bc: NodeId,
    pref: NodeId,
    pref_acc: f64,
}

/// Mean cloning loss and preference cross-entropy of a recorded batch.
fn supervised_losses(g: &mut Graph, f: &Forward, experts: &[ActionIndex], classes: &[usize]) -> Result<Losses> {
    let b = f.batch as f64;
    let mut bc = None;
    for (m, &h) in f.heads.iter().enumerate() {
        let idx = experts.iter().map(|a| a[m]).collect();
        let term = g.pick(h, idx, vec![-1.0 / b; f.batch])?;
        bc = Some(match bc {
            Some(acc) => g.add(acc, term)?,
            None => term,
        });
    }
    let pref = g.pick(f.pref_logp, classes.to_vec(), vec![-1.0 / b; f.batch])?;
    let probs = g.value(f.pref);
    let hits = classes
        .iter()
        .enumerate()
        .filter(|(r, &c)| argmax(&probs.row(*r).to_vec()) == c)
        .count();
    Ok(Losses {
        bc: bc.expect("at least one module"),
        pref,
        pref_acc: hits as f64 / b,
    })
}

fn batch_parts(batch: &[&Experience]) -> (Vec<PolicyInput>, Vec<ActionIndex>, Vec<usize>) {
    (
        batch.iter().map(|e| e.record.policy_input()).collect(),
        batch.iter().map(|e| e.action.indices()).collect(),
        batch.iter().map(|e| e.record.class.index()).collect(),
    )
}

/// Cloning loss `mean_b -sum_m log pi_m(a_m | s)` of a batch.
pub fn bc_loss(policy: &Policy, batch: &[&Experience]) -> Result<f64> {
    let (inputs, experts, classes) = batch_parts(batch);
    let mut g = Graph::new();
    let f = policy.forward(&mut g, &inputs)?;
    let l = supervised_losses(&mut g, &f, &experts, &classes)?;
    Ok(g.scalar(l.bc))
}

/// Mean cross-entropy of the class prediction.
pub fn pref_loss(policy: &Policy, batch: &[&Experience]) -> Result<f64> {
    let (inputs, experts, classes) = batch_parts(batch);
    let mut g = Graph::new();
    let f = policy.forward(&mut g, &inputs)?;
    let l = supervised_losses(&mut g, &f, &experts, &classes)?;
    Ok(g.scalar(l.pref))
}

fn check_finite(step: usize, stage: Stage, values: &[(&str, f64)]) -> Result<()> {
    if let Some((name, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
        return Err(TrainError::NonFinite {
            step,
            stage: stage.label(),
            detail: format!("{name} = {v}"),
        });
    }
    Ok(())
}

/// One cloning update on `L_BC + L_pref`.
pub fn bc_step(policy: &mut Policy, opt: &mut Adam, batch: &[&Experience], step: usize) -> Result<LogRecord> {
    let (inputs, experts, classes) = batch_parts(batch);
    let mut g = Graph::new();
    let f = policy.forward(&mut g, &inputs)?;
    let l = supervised_losses(&mut g, &f, &experts, &classes)?;
    let total = g.add(l.bc, l.pref)?;
    let (bc, pref) = (g.scalar(l.bc), g.scalar(l.pref));
    check_finite(step, Stage::Bc, &[("L_BC", bc), ("L_pref", pref)])?;
    let grads = g.backward(total)?.for_params(&g, policy.store());
    opt.apply(policy.store_mut(), &grads)?;
    Ok(LogRecord {
        step,
        stage: Stage::Bc,
        bc_loss: bc,
        pref_loss: pref,
        objective: None,
        mean_reward: None,
        pref_acc: l.pref_acc,
        lambda: 1.0,
    })
}

/// Scalars reported by one policy-gradient update.
#[derive(Debug, Clone, PartialEq)]
pub struct RlStepOutput {
    /// Surrogate `mean_b (r - b) log pi(a | s)`.
    pub objective: f64,
    pub mean_reward: f64,
    pub bc_loss: f64,
    pub pref_loss: f64,
    pub pref_acc: f64,
    /// Mean summed entropy of the module distributions.
    pub entropy: f64,
    pub actions: Vec<LinkConfig>,
    pub rewards: Vec<f64>,
}

/// Knobs of a single policy-gradient update.
#[derive(Debug, Clone, Copy)]
pub struct RlStepParams {
    pub lambda: f64,
    pub entropy_coef: f64,
    pub step: usize,
}

/// Samples one configuration per state, scores it with `reward_fn(i,
/// config)`, and applies one update of
/// `-J + lambda * L_BC + L_pref - entropy_coef * H`.
#[allow(clippy::too_many_arguments)]
pub fn rl_step(
    policy: &mut Policy,
    opt: &mut Adam,
    baseline: &mut Baseline,
    inputs: &[PolicyInput],
    classes: &[usize],
    experts: &[ActionIndex],
    params: RlStepParams,
    rng: &mut ChaCha8Rng,
    reward_fn: &mut dyn FnMut(usize, &LinkConfig) -> f64,
) -> Result<RlStepOutput> {
    let mut g = Graph::new();
    let f = policy.forward(&mut g, inputs)?;
    let n = f.batch;
    let bf = n as f64;

    let mut actions = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    for i in 0..n {
        let dists: Vec<Vec<f64>> = f.heads.iter().map(|&h| g.value(h).row(i).mapv(f64::exp).to_vec()).collect();
        let (config, _) = sample_action(&dists, rng);
        rewards.push(reward_fn(i, &config));
        actions.push(config);
    }

    // Classes seen for the first time start their baseline at this batch's
    // mean, so their first advantages are centered.
    for c in 0..3 {
        if baseline.get(c).is_none() {
            let rs: Vec<f64> = (0..n).filter(|&i| classes[i] == c).map(|i| rewards[i]).collect();
            if !rs.is_empty() {
                baseline.update(c, rs.iter().sum::<f64>() / rs.len() as f64);
            }
        }
    }
    let adv: Vec<f64> = (0..n).map(|i| rewards[i] - baseline.get(classes[i]).unwrap()).collect();

    let mut pg = None;
    let mut neg_entropy = None;
    for (m, &h) in f.heads.iter().enumerate() {
        let idx = actions.iter().map(|a| a.indices()[m]).collect();
        let w = adv.iter().map(|a| -a / bf).collect();
        let term = g.pick(h, idx, w)?;
        pg = Some(match pg {
            Some(acc) => g.add(acc, term)?,
            None => term,
        });
        let p = g.exp(h);
        let plogp = g.mul(p, h)?;
        let s = g.sum(plogp);
        neg_entropy = Some(match neg_entropy {
            Some(acc) => g.add(acc, s)?,
            None => s,
        });
    }
    let pg = pg.expect("modules");
    let neg_entropy = g.scale(neg_entropy.expect("modules"), 1.0 / bf);
    let l = supervised_losses(&mut g, &f, experts, classes)?;

    let ent_term = g.scale(neg_entropy, params.entropy_coef);
    let bc_term = g.scale(l.bc, params.lambda);
    let total = g.add(pg, ent_term)?;
    let total = g.add(total, bc_term)?;
    let total = g.add(total, l.pref)?;

    let out = RlStepOutput {
        objective: -g.scalar(pg),
        mean_reward: rewards.iter().sum::<f64>() / bf,
        bc_loss: g.scalar(l.bc),
        pref_loss: g.scalar(l.pref),
        pref_acc: l.pref_acc,
        entropy: -g.scalar(neg_entropy),
        actions,
        rewards,
    };
    check_finite(
        params.step,
        Stage::Rl,
        &[
            ("J", out.objective),
            ("L_BC", out.bc_loss),
            ("L_pref", out.pref_loss),
            ("total", g.scalar(total)),
        ],
    )?;
    let grads = g.backward(total)?.for_params(&g, policy.store());
    opt.apply(policy.store_mut(), &grads)?;

    for c in 0..3 {
        let rs: Vec<f64> = (0..n).filter(|&i| classes[i] == c).map(|i| out.rewards[i]).collect();
        if !rs.is_empty() {
            baseline.update(c, rs.iter().sum::<f64>() / rs.len() as f64);
        }
    }
    debug_assert_eq!(NUM_MODULES, f.heads.len());
    Ok(out)
}

/// Result of a full two-stage run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy,
    /// Snapshot at the end of behavior cloning.
    pub after_bc: Policy,
    pub log: Vec<LogRecord>,
}

/// Runs the cloning epochs only.
pub fn train_bc(
    policy: &mut Policy,
    cfg: &TrainConfig,
    buffer: &[Experience],
    on_step: &mut dyn FnMut(&Policy, &LogRecord),
) -> Result<Vec<LogRecord>> {
    cfg.validate()?;
    if buffer.is_empty() {
        return Err(TrainError::Config("empty expert buffer".into()));
    }
    let mut opt = cfg.optimizer(policy);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xB0C1_0000);
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut log = Vec::new();
    for _ in 0..cfg.bc_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Experience> = chunk.iter().map(|&i| &buffer[i]).collect();
            let rec = bc_step(policy, &mut opt, &batch, log.len())?;
            on_step(policy, &rec);
            log.push(rec);
        }
    }
    Ok(log)
}

/// Runs the policy-gradient stage on states drawn from the buffer; step
/// numbers in the log start at `first_step`.
pub fn train_rl(
    policy: &mut Policy,
    cfg: &TrainConfig,
    buffer: &[Experience],
    scenarios: &ScenarioSet,
    first_step: usize,
    on_step: &mut dyn FnMut(&Policy, &LogRecord),
) -> Result<Vec<LogRecord>> {
    cfg.validate()?;
    if buffer.is_empty() {
        return Err(TrainError::Config("empty expert buffer".into()));
    }
    let channels: Vec<ChannelRealization> = buffer
        .iter()
        .map(|e| e.record.channel(scenarios))
        .collect::<linkforge_core::Result<_>>()?;
    let mut opt = cfg.optimizer(policy);
    let mut baseline = Baseline::new(cfg.baseline_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4E1F_0000);
    let mut log = Vec::with_capacity(cfg.rl_steps);
    let per_step = (cfg.batch_size * cfg.rl_budget.mc_seeds) as u64;
    for s in 0..cfg.rl_steps {
        let picks: Vec<usize> = (0..cfg.batch_size).map(|_| rng.random_range(0..buffer.len())).collect();
        let batch: Vec<&Experience> = picks.iter().map(|&i| &buffer[i]).collect();
        let (inputs, experts, classes) = batch_parts(&batch);
        let lambda = cfg.lambda(s);
        let step_base = cfg.rl_budget.eval_seed_base.wrapping_add(s as u64 * per_step);
        let mut reward_fn = |i: usize, config: &LinkConfig| {
            let budget = SearchBudget {
                eval_seed_base: step_base.wrapping_add((i * cfg.rl_budget.mc_seeds) as u64),
                ..cfg.rl_budget
            };
            let e = batch[i];
            evaluate_config(config, &channels[picks[i]], &class_weights(e.record.class), &budget)
                .map(|ev| ev.reward)
                .unwrap_or(0.0)
        };
        let params = RlStepParams {
            lambda,
            entropy_coef: cfg.entropy_coef,
            step: first_step + s,
        };
        let out = rl_step(
            policy,
            &mut opt,
            &mut baseline,
            &inputs,
            &classes,
            &experts,
            params,
            &mut rng,
            &mut reward_fn,
        )?;
        let rec = LogRecord {
            step: first_step + s,
            stage: Stage::Rl,
            bc_loss: out.bc_loss,
            pref_loss: out.pref_loss,
            objective: Some(out.objective),
            mean_reward: Some(out.mean_reward),
            pref_acc: out.pref_acc,
            lambda,
        };
        on_step(policy, &rec);
        log.push(rec);
    }
    Ok(log)
}

/// Stage 1 then stage 2 from a fresh policy seeded by `cfg.seed`.
pub fn train(
    cfg: &TrainConfig,
    buffer: &[Experience],
    scenarios: &ScenarioSet,
    on_step: &mut dyn FnMut(&Policy, &LogRecord),
) -> Result<TrainOutcome> {
    let mut policy = Policy::new(cfg.seed);
    let mut log = train_bc(&mut policy, cfg, buffer, on_step)?;
    let after_bc = policy.clone();
    let rl = train_rl(&mut policy, cfg, buffer, scenarios, log.len(), on_step)?;
    log.extend(rl);
    Ok(TrainOutcome { policy, after_bc, log })
}

/// Fraction of (state, module) pairs where the policy's argmax equals the
/// expert's option, overall and per module.
pub fn argmax_agreement(policy: &Policy, buffer: &[Experience]) -> Result<(f64, [f64; NUM_MODULES])> {
    let mut hits = [0usize; NUM_MODULES];
    for chunk in buffer.chunks(64) {
        let inputs: Vec<PolicyInput> = chunk.iter().map(|e| e.record.policy_input()).collect();
        for (out, e) in policy.infer(&inputs)?.iter().zip(chunk) {
            let chosen = out.greedy_action().indices();
            let expert = e.action.indices();
            for m in 0..NUM_MODULES {
                hits[m] += usize::from(chosen[m] == expert[m]);
            }
        }
    }
    let n = buffer.len().max(1) as f64;
    let per: [f64; NUM_MODULES] = hits.map(|h| h as f64 / n);
    Ok((per.iter().sum::<f64>() / NUM_MODULES as f64, per))
}
