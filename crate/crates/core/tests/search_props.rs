use linkforge_core::action::{Module, NUM_MODULES, OPTION_COUNTS};
use linkforge_core::intent::PreferenceClass;
use linkforge_core::search::*;
use linkforge_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn budget() -> SearchBudget {
    SearchBudget {
        mc_seeds: 4,
        eval_seed_base: 0,
        payload_bits: 64,
    }
}

fn instance(i: u64) -> (ChannelRealization, RewardWeights) {
    let mut rng = ChaCha8Rng::seed_from_u64(i);
    let sc = &Scenario::builtin()[rng.random_range(0..3)];
    let snr = rng.random_range(-5.0..20.0);
    let raw: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let s: f64 = raw.iter().sum();
    let p = PreferenceVector::new([raw[0] / s, raw[1] / s, 1.0 - raw[0] / s - raw[1] / s]).unwrap();
    (generate_channel(sc, snr, i).unwrap(), pref_to_weights(&p))
}

#[test]
fn random_select_is_uniform_per_module() {
    let n = 10_000;
    let mut counts = [0usize; 5];
    for seed in 0..n {
        counts[random_select(seed as u64).coding.index()] += 1;
    }
    // chi-square with 4 degrees of freedom, 0.999 quantile 18.47
    let expected = n as f64 / 5.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 18.47, "chi2 {chi2}");
    for &c in &counts {
        assert!((c as f64 / n as f64 - 0.2).abs() < 0.02);
    }
}

#[test]
fn beam_one_equals_greedy() {
    for i in 0..30 {
        let (ch, w) = instance(i);
        let g = greedy_search(&ch, &w, &budget()).unwrap();
        let b = beam_search(&ch, &w, 1, &budget()).unwrap();
        assert_eq!(g, b, "instance {i}");
    }
}

#[test]
fn greedy_is_coordinatewise_optimal_in_last_module() {
    for i in 0..10 {
        let (ch, w) = instance(100 + i);
        let g = greedy_search(&ch, &w, &budget()).unwrap();
        let mut eval = Evaluator::new(&ch, w, budget()).unwrap();
        let idx = g.config.indices();
        let last = NUM_MODULES - 1;
        for opt in 0..OPTION_COUNTS[last] {
            let mut cand = idx;
            cand[last] = opt;
            assert!(eval.mean_reward(&cand) <= g.reward);
        }
    }
}

#[test]
fn search_rewards_are_bounded_and_reproducible() {
    let (ch, w) = instance(7);
    let a = beam_search(&ch, &w, 3, &budget()).unwrap();
    let b = beam_search(&ch, &w, 3, &budget()).unwrap();
    assert_eq!(a, b);
    assert!((0.0..=1.0).contains(&a.reward));
    let mut eval = Evaluator::new(&ch, w, budget()).unwrap();
    assert_eq!(eval.mean_reward(&a.config.indices()), a.reward);
}

#[test]
fn two_module_dominance_chain() {
    let base = LinkConfig::default();
    let space = SearchSpace::around(&base, &[Module::Coding, Module::Modulation]);
    let (mut ex, mut bm, mut gr) = (0.0, 0.0, 0.0);
    for i in 0..15 {
        let (ch, w) = instance(200 + i);
        let e = exhaustive_oracle(&ch, &w, &space, &budget()).unwrap();
        let b = beam_search_in(&space, &ch, &w, 3, &budget()).unwrap();
        let g = greedy_search_in(&space, &ch, &w, &budget()).unwrap();
        assert!(e.reward >= b.reward);
        ex += e.reward;
        bm += b.reward;
        gr += g.reward;
    }
    assert!(ex >= bm && bm >= gr, "{ex} {bm} {gr}");
}

#[test]
fn oracle_ignores_enumeration_order() {
    let (ch, w) = instance(300);
    let a = SearchSpace::around(&LinkConfig::default(), &[Module::Modulation, Module::Coding]);
    let b = SearchSpace::around(&LinkConfig::default(), &[Module::Coding, Module::Modulation]);
    assert_eq!(
        exhaustive_oracle(&ch, &w, &a, &budget()).unwrap(),
        exhaustive_oracle(&ch, &w, &b, &budget()).unwrap()
    );
}

#[test]
fn beam_three_not_worse_than_greedy_on_average() {
    let mut diff = 0.0;
    for (k, class) in PreferenceClass::ALL.iter().enumerate() {
        let w = pref_to_weights(&class.preference());
        for (j, sc) in Scenario::builtin().iter().enumerate() {
            for snr in [-5.0, 5.0, 15.0] {
                let ch = generate_channel(sc, snr, (k * 10 + j) as u64).unwrap();
                let g = greedy_search(&ch, &w, &budget()).unwrap();
                let b = beam_search(&ch, &w, 3, &budget()).unwrap();
                diff += b.reward - g.reward;
            }
        }
    }
    assert!(diff >= 0.0, "{diff}");
}
