use linkforge_core::action::{LinkConfig, Module, NUM_MODULES, OPTION_COUNTS};
use linkforge_core::{ScenarioSet, SearchBudget};
use linkforge_policy::{Adam, Graph, Policy, PolicyInput, Tensor};
use linkforge_train::expert::replay_reward;
use linkforge_train::train::{argmax_agreement, train_bc, Baseline, RlStepParams};
use linkforge_train::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_budget() -> SearchBudget {
    SearchBudget {
        mc_seeds: 3,
        eval_seed_base: 0,
        payload_bits: 64,
    }
}

fn buffer(n: usize, seed: u64) -> Vec<Experience> {
    let set = ScenarioSet::default();
    let data = generate_dataset(n, &set, seed).unwrap();
    collect_expert(&data, &set, &small_budget()).unwrap()
}

#[test]
fn expert_buffer_is_stratified_bounded_and_replayable() {
    let set = ScenarioSet::default();
    let buf = buffer(9, 1);
    assert_eq!(buf.len(), 9);
    for class in linkforge_core::PreferenceClass::ALL {
        assert_eq!(buf.iter().filter(|e| e.record.class == class).count(), 3);
    }
    for e in &buf {
        assert!((0.0..=1.0).contains(&e.reward));
        assert_eq!(replay_reward(e, &set, &small_budget()).unwrap(), e.reward);
    }
}

#[test]
fn uniform_policy_losses_have_closed_forms() {
    let buf = buffer(12, 2);
    let refs: Vec<&Experience> = buf.iter().collect();
    let policy = Policy::with_head_std(0, 0.0);
    let expected: f64 = OPTION_COUNTS.iter().map(|&n| (n as f64).ln()).sum();
    assert!((bc_loss(&policy, &refs).unwrap() - expected).abs() < 1e-9);
    assert!((pref_loss(&policy, &refs).unwrap() - 3f64.ln()).abs() < 1e-12);
    // Default initialization is uniform up to the tiny head weights.
    assert!((bc_loss(&Policy::new(0), &refs).unwrap() - expected).abs() < 0.01);
}

#[test]
fn one_hot_policy_has_zero_cloning_loss() {
    let buf = buffer(3, 3);
    let target = buf[0].action.indices();
    let same: Vec<Experience> = buf
        .iter()
        .map(|e| Experience {
            action: buf[0].action,
            ..e.clone()
        })
        .collect();
    let refs: Vec<&Experience> = same.iter().collect();
    let mut policy = Policy::with_head_std(0, 0.0);
    for (m, module) in Module::ALL.iter().enumerate() {
        let mut b = Tensor::zeros((1, OPTION_COUNTS[m]));
        b[[0, target[m]]] = 1e3;
        policy.store_mut().set(&format!("actor.{}.b", module.name()), b).unwrap();
    }
    assert_eq!(bc_loss(&policy, &refs).unwrap(), 0.0);
}

#[test]
fn pref_loss_reaches_backbone_and_embeddings() {
    let buf = buffer(6, 4);
    let policy = Policy::new(5);
    let inputs: Vec<PolicyInput> = buf.iter().map(|e| e.record.policy_input()).collect();
    let mut g = Graph::new();
    let f = policy.forward(&mut g, &inputs).unwrap();
    let classes = buf.iter().map(|e| e.record.class.index()).collect();
    let loss = g.pick(f.pref_logp, classes, vec![-1.0 / 6.0; 6]).unwrap();
    let grads = g.backward(loss).unwrap().for_params(&g, policy.store());
    let store = policy.store();
    for prefix in ["block0.", "block1.attn", "text.embed", "csi.w", "conn."] {
        let norm: f64 = store
            .ids()
            .filter(|&id| store.name(id).starts_with(prefix))
            .map(|id| grads[id.index()].iter().map(|x| x * x).sum::<f64>())
            .sum();
        assert!(norm > 0.0, "{prefix}");
    }
}

#[test]
fn cloning_loss_falls_every_epoch() {
    let buf = buffer(64, 5);
    let refs: Vec<&Experience> = buf.iter().collect();
    let mut policy = Policy::new(6);
    let cfg = TrainConfig {
        bc_epochs: 1,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let mut losses = vec![bc_loss(&policy, &refs).unwrap()];
    for epoch in 0..8 {
        let cfg = TrainConfig { seed: epoch, ..cfg.clone() };
        train_bc(&mut policy, &cfg, &buf, &mut |_, _| {}).unwrap();
        losses.push(bc_loss(&policy, &refs).unwrap());
    }
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "{losses:?}");
    }
}

#[test]
fn lambda_schedule_hits_both_ends() {
    let cfg = TrainConfig {
        rl_steps: 37,
        ..TrainConfig::default()
    };
    assert_eq!(cfg.lambda(0), 1.0);
    assert_eq!(cfg.lambda(36), 0.1);
    for s in 1..37 {
        assert!(cfg.lambda(s) < cfg.lambda(s - 1));
    }
}

#[test]
fn baseline_tracks_a_constant_reward() {
    let mut b = Baseline::new(0.9);
    assert_eq!(b.get(1), None);
    b.update(1, 0.3);
    assert_eq!(b.get(1), Some(0.3));
    let mut b = Baseline::new(0.9);
    b.update(0, 0.0);
    for _ in 0..400 {
        b.update(0, 0.7);
    }
    assert!((b.get(0).unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn constant_reward_gives_zero_policy_gradient_term() {
    let buf = buffer(6, 7);
    let mut policy = Policy::new(8);
    let mut opt = Adam::new(policy.store(), 1e-3);
    let mut base = Baseline::new(0.9);
    let inputs: Vec<PolicyInput> = buf.iter().map(|e| e.record.policy_input()).collect();
    let classes: Vec<usize> = buf.iter().map(|e| e.record.class.index()).collect();
    let experts: Vec<_> = buf.iter().map(|e| e.action.indices()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = RlStepParams {
        lambda: 0.5,
        entropy_coef: 0.01,
        step: 0,
    };
    for _ in 0..3 {
        let out = rl_step(
            &mut policy,
            &mut opt,
            &mut base,
            &inputs,
            &classes,
            &experts,
            params,
            &mut rng,
            &mut |_, _| 0.42,
        )
        .unwrap();
        assert_eq!(out.objective, 0.0);
    }
}

fn bandit_inputs(n: usize) -> (Vec<PolicyInput>, Vec<usize>, Vec<[usize; NUM_MODULES]>) {
    let buf = buffer(n, 9);
    (
        buf.iter().map(|e| e.record.policy_input()).collect(),
        buf.iter().map(|e| e.record.class.index()).collect(),
        buf.iter().map(|e| e.action.indices()).collect(),
    )
}

#[test]
fn rigged_bandit_converges_to_the_paying_option() {
    let (inputs, classes, experts) = bandit_inputs(8);
    let mut policy = Policy::new(10);
    let mut opt = Adam::new(policy.store(), 1e-2);
    let mut base = Baseline::new(0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = RlStepParams {
        lambda: 0.0,
        entropy_coef: 0.01,
        step: 0,
    };
    let mut reached = None;
    for step in 0..500 {
        rl_step(
            &mut policy,
            &mut opt,
            &mut base,
            &inputs,
            &classes,
            &experts,
            params,
            &mut rng,
            &mut |_, c: &LinkConfig| if c.indices()[0] == 2 { 1.0 } else { 0.0 },
        )
        .unwrap();
        let mass = policy
            .infer(&inputs)
            .unwrap()
            .iter()
            .map(|o| o.dists[0][2])
            .fold(1.0f64, f64::min);
        if mass > 0.99 {
            reached = Some(step);
            break;
        }
    }
    assert!(reached.is_some(), "mass on option 2 never exceeded 0.99");
}

#[test]
fn baseline_term_has_zero_mean_gradient() {
    // Gradient of b * log pi(a) with respect to the logits is b * (e_a - p)
    // for a ~ pi; over many draws it must average to zero.
    let logits = [0.3, -1.2, 2.0, 0.1, -0.4];
    let n = 10_000;
    let b = 0.6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p: Vec<f64> = {
        let z: f64 = logits.iter().map(|l: &f64| l.exp()).sum();
        logits.iter().map(|l| l.exp() / z).collect()
    };
    let idx: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut cum = 0.0;
            p.iter().position(|&q| {
                cum += q;
                u < cum
            })
            .unwrap_or(4)
        })
        .collect();
    let mut g = Graph::new();
    let x = g.input(Tensor::from_shape_fn((n, 5), |(_, j)| logits[j]));
    let lp = g.log_softmax(x);
    let loss = g.pick(lp, idx, vec![b; n]).unwrap();
    let grads = g.backward(loss).unwrap();
    let per_sample = grads.get(x).unwrap();
    for j in 0..5 {
        let col = per_sample.column(j);
        let mean = col.mean().unwrap();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "component {j}: mean {mean} se {se}");
    }
}

#[test]
fn training_is_reproducible() {
    let buf = buffer(12, 11);
    let set = ScenarioSet::default();
    let cfg = TrainConfig {
        bc_epochs: 1,
        rl_steps: 3,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let a = train(&cfg, &buf, &set, &mut |_, _| {}).unwrap();
    let b = train(&cfg, &buf, &set, &mut |_, _| {}).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.policy.to_bytes(), b.policy.to_bytes());
    assert_eq!(a.log.len(), 3 + 3);
    assert_eq!(a.log[3].lambda, 1.0);
    assert_eq!(a.log[5].lambda, 0.1);
    let (overall, per) = argmax_agreement(&a.policy, &buf).unwrap();
    assert!((0.0..=1.0).contains(&overall));
    assert_eq!(per.len(), NUM_MODULES);
}

#[test]
fn config_parses_and_validates() {
    let cfg = TrainConfig::from_toml_str("rl_steps = 50\nbc_epochs = 1\n[expert_budget]\nmc_seeds = 2\n").unwrap();
    assert_eq!(cfg.rl_steps, 50);
    assert_eq!(cfg.expert_budget.mc_seeds, 2);
    assert_eq!(cfg.expert_budget.payload_bits, 256);
    assert!(TrainConfig::from_toml_str("lambda_start = 2.0").is_err());
    assert!(TrainConfig::from_toml_str("batch_size = 0").is_err());
    assert!(TrainConfig::from_toml_str("bogus = 1").is_err());
}
