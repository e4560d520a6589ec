//! Scalar reward from link metrics and a preference over
//! (reliability, throughput, complexity).

use serde::{Deserialize, Serialize};

use crate::action::{comp_max, rate_max};
use crate::error::{LinkError, Result};
use crate::phy::LinkMetrics;

const SIMPLEX_TOL: f64 = 1e-6;

/// BER at or below this counts as perfect reliability.
pub const BER_FLOOR: f64 = 1e-6;

/// Minimum share any objective keeps after mapping preferences to weights.
pub const WEIGHT_FLOOR: f64 = 0.05;

fn check_simplex(v: [f64; 3], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || *x < -SIMPLEX_TOL) {
        return Err(LinkError::Contract(format!("{what} has a negative or non-finite entry: {v:?}")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(LinkError::Contract(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Preference over (reliability, throughput, complexity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceVector([f64; 3]);

impl PreferenceVector {
    pub fn new(p: [f64; 3]) -> Result<Self> {
        check_simplex(p, "preference vector")?;
        Ok(Self(p))
    }

    pub fn uniform() -> Self {
        Self([1.0 / 3.0; 3])
    }

    /// The low-complexity corner, not one of the three training classes.
    pub fn low_complexity() -> Self {
        Self([0.1, 0.1, 0.8])
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn reliability(&self) -> f64 {
        self.0[0]
    }

    pub fn throughput(&self) -> f64 {
        self.0[1]
    }

    pub fn complexity(&self) -> f64 {
        self.0[2]
    }

    /// Index of the largest component (lowest index on ties).
    pub fn dominant_axis(&self) -> usize {
        argmax3(self.0)
    }
}

fn argmax3(v: [f64; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub ber: f64,
    pub rate: f64,
    pub comp: f64,
}

impl RewardWeights {
    pub fn new(ber: f64, rate: f64, comp: f64) -> Result<Self> {
        check_simplex([ber, rate, comp], "reward weights")?;
        Ok(Self { ber, rate, comp })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.ber, self.rate, self.comp]
    }
}

/// Normalized reward terms, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedTerms {
    pub ber: f64,
    pub rate: f64,
    pub comp: f64,
}

impl NormalizedTerms {
    /// What an infeasible configuration earns.
    pub const FLOOR: NormalizedTerms = NormalizedTerms {
        ber: 0.0,
        rate: 0.0,
        comp: 0.0,
    };
}

pub fn normalize_metrics(m: &LinkMetrics) -> NormalizedTerms {
    let ber = (-(m.ber.max(BER_FLOOR)).log10() / 6.0).clamp(0.0, 1.0);
    let rate = (m.goodput / rate_max()).clamp(0.0, 1.0);
    let comp = (1.0 - m.complexity / comp_max() as f64).clamp(0.0, 1.0);
    NormalizedTerms { ber, rate, comp }
}

pub fn reward(terms: &NormalizedTerms, w: &RewardWeights) -> Result<f64> {
    check_simplex(w.as_array(), "reward weights")?;
    Ok((w.ber * terms.ber + w.rate * terms.rate + w.comp * terms.comp).clamp(0.0, 1.0))
}

/// Maps a preference vector to reward weights: every component is floored
/// at [`WEIGHT_FLOOR`] and the result renormalized.
pub fn pref_to_weights(p: &PreferenceVector) -> RewardWeights {
    let floored = p.0.map(|x| x.max(WEIGHT_FLOOR));
    let sum: f64 = floored.iter().sum();
    RewardWeights {
        ber: floored[0] / sum,
        rate: floored[1] / sum,
        comp: floored[2] / sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn metrics(ber: f64, goodput: f64, complexity: f64) -> LinkMetrics {
        LinkMetrics {
            ber,
            goodput,
            complexity,
            avg_transmissions: 1.0,
        }
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_metrics(&metrics(1.0, 0.0, 0.0)).ber, 0.0);
        assert_eq!(normalize_metrics(&metrics(1e-6, 0.0, 0.0)).ber, 1.0);
        assert_eq!(normalize_metrics(&metrics(0.0, 0.0, 0.0)).ber, 1.0);
        assert_eq!(normalize_metrics(&metrics(0.5, 0.0, 19.0)).comp, 0.0);
        assert_eq!(normalize_metrics(&metrics(0.5, 6.0, 0.0)).rate, 1.0);
        assert!((normalize_metrics(&metrics(1e-3, 0.0, 0.0)).ber - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights::new(1.0, 0.0, 0.0).unwrap();
        let t = NormalizedTerms { ber: 0.5, rate: 0.1, comp: 0.9 };
        assert_eq!(reward(&t, &w).unwrap(), 0.5);

        let ones = NormalizedTerms { ber: 1.0, rate: 1.0, comp: 1.0 };
        assert!((reward(&ones, &RewardWeights::new(0.2, 0.3, 0.5).unwrap()).unwrap() - 1.0).abs() < 1e-12);

        let w = RewardWeights::new(0.5, 0.3, 0.2).unwrap();
        let t = NormalizedTerms { ber: 1.0, rate: 0.4, comp: 0.5 };
        assert!((reward(&t, &w).unwrap() - 0.72).abs() < 1e-12);
    }

    #[test]
    fn weight_sum_violation_is_contract_error() {
        assert!(RewardWeights::new(0.5, 0.5, 0.5).is_err());
        let bad = RewardWeights { ber: 0.9, rate: 0.9, comp: 0.0 };
        assert!(matches!(
            reward(&NormalizedTerms::FLOOR, &bad),
            Err(LinkError::Contract(_))
        ));
        assert!(PreferenceVector::new([0.5, 0.6, -0.1]).is_err());
    }

    #[test]
    fn pref_mapping_examples() {
        let w = pref_to_weights(&PreferenceVector::uniform());
        for x in w.as_array() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        let w = pref_to_weights(&PreferenceVector::new([1.0, 0.0, 0.0]).unwrap());
        assert!((w.ber - 1.0 / 1.1).abs() < 1e-12);
        assert!((w.rate - 0.05 / 1.1).abs() < 1e-12);
        assert!((w.comp - 0.05 / 1.1).abs() < 1e-12);
        assert!((w.ber - 0.9091).abs() < 1e-4);
        assert!((w.rate - 0.0455).abs() < 1e-4);
    }

    fn simplex() -> impl Strategy<Value = [f64; 3]> {
        (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64)
            .prop_filter("non-degenerate", |(a, b, c)| a + b + c > 1e-3)
            .prop_map(|(a, b, c)| {
                let s = a + b + c;
                [a / s, b / s, c / s]
            })
    }

    proptest! {
        #[test]
        fn weights_stay_on_floored_simplex(p in simplex()) {
            let w = pref_to_weights(&PreferenceVector::new(p).unwrap());
            let arr = w.as_array();
            prop_assert!((arr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let min = WEIGHT_FLOOR / (1.0 + 3.0 * WEIGHT_FLOOR);
            prop_assert!(arr.iter().all(|&x| x >= min - 1e-9 && x <= 1.0));
            let ties = (0..3).any(|i| (0..3).any(|j| i != j && (p[i] - p[j]).abs() < 1e-12));
            if !ties {
                prop_assert_eq!(argmax3(arr), argmax3(p));
            }
        }

        #[test]
        fn reward_bounded_and_monotone(
            p in simplex(),
            t in (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64),
            bump in 0.0..1.0f64,
            axis in 0usize..3,
        ) {
            let w = RewardWeights::new(p[0], p[1], p[2]).unwrap();
            let base = NormalizedTerms { ber: t.0, rate: t.1, comp: t.2 };
            let r = reward(&base, &w).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            let mut up = base;
            match axis {
                0 => up.ber = (up.ber + bump).min(1.0),
                1 => up.rate = (up.rate + bump).min(1.0),
                _ => up.comp = (up.comp + bump).min(1.0),
            }
            prop_assert!(reward(&up, &w).unwrap() >= r - 1e-12);
        }

        #[test]
        fn normalized_terms_in_unit_box(ber in 0.0..=1.0f64, goodput in 0.0..6.0f64, comp in 0.0..=19.0f64) {
            let t = normalize_metrics(&metrics(ber, goodput, comp));
            for x in [t.ber, t.rate, t.comp] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }
    }
}
