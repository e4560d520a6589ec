//! Time-varying frequency-selective channels.
//!
//! Each scenario is a tapped delay line with an exponential power-delay
//! profile. Every tap fades independently following a Jakes
//! sum-of-sinusoids process, and the taps are transformed onto a fixed
//! OFDM grid of [`GRID_SYMBOLS`] x [`GRID_SUBCARRIERS`] cells.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::GRID_SUBCARRIERS;
use crate::error::{LinkError, Result};

/// OFDM symbols per realization (time rows of the grid).
pub const GRID_SYMBOLS: usize = 16;

/// Sinusoids per tap in the Jakes generator.
pub const JAKES_SINUSOIDS: usize = 16;

/// Columns of the CSI feature matrix: one per subcarrier plus the SNR column.
pub const CSI_COLS: usize = GRID_SUBCARRIERS + 1;

pub const CSI_DB_MIN: f64 = -40.0;
pub const CSI_DB_MAX: f64 = 20.0;

pub const SNR_DB_MIN: f64 = -10.0;
pub const SNR_DB_MAX: f64 = 30.0;

/// A named propagation profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Number of taps, at integer sample delays `0..taps`.
    #[serde(rename = "taps")]
    pub num_taps: usize,
    /// Decay constant of the power-delay profile, in sample periods.
    pub delay_spread: f64,
    /// Maximum Doppler shift times the OFDM symbol period.
    pub doppler: f64,
}

impl Scenario {
    pub fn new(name: impl Into<String>, num_taps: usize, delay_spread: f64, doppler: f64) -> Result<Self> {
        let s = Self {
            name: name.into(),
            num_taps,
            delay_spread,
            doppler,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn urban() -> Self {
        Self::new("Urban", 6, 2.0, 0.01).unwrap()
    }

    pub fn rural() -> Self {
        Self::new("Rural", 3, 0.5, 0.005).unwrap()
    }

    pub fn highway() -> Self {
        Self::new("Highway", 4, 1.0, 0.05).unwrap()
    }

    pub fn builtin() -> [Scenario; 3] {
        [Self::urban(), Self::rural(), Self::highway()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(LinkError::InvalidScenario("empty name".into()));
        }
        if self.num_taps == 0 || self.num_taps > GRID_SUBCARRIERS {
            return Err(LinkError::InvalidScenario(format!(
                "{}: taps must be in 1..={GRID_SUBCARRIERS}, got {}",
                self.name, self.num_taps
            )));
        }
        if !(self.delay_spread.is_finite() && self.delay_spread >= 0.0) {
            return Err(LinkError::InvalidScenario(format!(
                "{}: delay_spread must be >= 0",
                self.name
            )));
        }
        if !(self.doppler.is_finite() && self.doppler >= 0.0) {
            return Err(LinkError::InvalidScenario(format!("{}: doppler must be >= 0", self.name)));
        }
        Ok(())
    }

    /// Normalized tap powers (sum to one).
    pub fn tap_powers(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.num_taps)
            .map(|k| {
                if k == 0 {
                    1.0
                } else if self.delay_spread == 0.0 {
                    0.0
                } else {
                    (-(k as f64) / self.delay_spread).exp()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }
}

/// A set of scenario profiles, looked up by name (case-insensitive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    #[serde(rename = "scenario")]
    scenarios: Vec<Scenario>,
}

impl Default for ScenarioSet {
    fn default() -> Self {
        Self {
            scenarios: Scenario::builtin().to_vec(),
        }
    }
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(LinkError::InvalidScenario("no scenarios defined".into()));
        }
        for (i, s) in scenarios.iter().enumerate() {
            s.validate()?;
            if scenarios[..i].iter().any(|o| o.name.eq_ignore_ascii_case(&s.name)) {
                return Err(LinkError::InvalidScenario(format!("duplicate scenario `{}`", s.name)));
            }
        }
        Ok(Self { scenarios })
    }

    /// Parses profiles of the form
    ///
    /// ```toml
    /// [[scenario]]
    /// name = "Urban"
    /// taps = 6
    /// delay_spread = 2.0
    /// doppler = 0.01
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let parsed: ScenarioSet =
            toml::from_str(text).map_err(|e| LinkError::Parse(format!("scenario profiles: {e}")))?;
        Self::new(parsed.scenarios)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LinkError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario set serializes")
    }

    pub fn get(&self, name: &str) -> Result<&Scenario> {
        self.scenarios
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| LinkError::UnknownScenario(name.to_string()))
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn names(&self) -> Vec<&str> {
        self.scenarios.iter().map(|s| s.name.as_str()).collect()
    }
}

/// Complex channel gains on the time-frequency grid plus the noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Row-major `[GRID_SYMBOLS x GRID_SUBCARRIERS]`.
    gains: Vec<Complex64>,
    /// Total complex noise power per resource element.
    pub noise_variance: f64,
    pub scenario: Scenario,
    pub snr_db: f64,
}

fn check_snr(snr_db: f64) -> Result<()> {
    if !snr_db.is_finite() || !(SNR_DB_MIN..=SNR_DB_MAX).contains(&snr_db) {
        return Err(LinkError::InvalidSnr(snr_db));
    }
    Ok(())
}

pub fn snr_to_noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Draws a channel for `scenario` at `snr_db`. Deterministic in its arguments;
/// the fading does not depend on the SNR, so one seed gives the same gains at
/// every SNR.
pub fn generate_channel(scenario: &Scenario, snr_db: f64, seed: u64) -> Result<ChannelRealization> {
    check_snr(snr_db)?;
    scenario.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let powers = scenario.tap_powers();
    let n = JAKES_SINUSOIDS as f64;
    let omega = 2.0 * PI * scenario.doppler;

    // taps[k][t]
    let taps: Vec<Vec<Complex64>> = powers
        .iter()
        .map(|&p| {
            let theta = rng.random_range(-PI..PI);
            let sinusoids: Vec<(f64, f64)> = (0..JAKES_SINUSOIDS)
                .map(|i| {
                    let alpha = (2.0 * PI * (i + 1) as f64 - PI + theta) / n;
                    let phase = rng.random_range(-PI..PI);
                    (omega * alpha.cos(), phase)
                })
                .collect();
            let amp = (p / n).sqrt();
            (0..GRID_SYMBOLS)
                .map(|t| {
                    sinusoids
                        .iter()
                        .map(|&(w, phi)| Complex64::from_polar(amp, w * t as f64 + phi))
                        .sum()
                })
                .collect()
        })
        .collect();

    let twiddle: Vec<Complex64> = (0..GRID_SUBCARRIERS)
        .map(|i| Complex64::from_polar(1.0, -2.0 * PI * i as f64 / GRID_SUBCARRIERS as f64))
        .collect();

    let mut gains = vec![Complex64::new(0.0, 0.0); GRID_SYMBOLS * GRID_SUBCARRIERS];
    for t in 0..GRID_SYMBOLS {
        for f in 0..GRID_SUBCARRIERS {
            gains[t * GRID_SUBCARRIERS + f] = taps
                .iter()
                .enumerate()
                .map(|(k, tap)| tap[t] * twiddle[(f * k) % GRID_SUBCARRIERS])
                .sum();
        }
    }

    // Unit average power over the grid.
    let mean_power = gains.iter().map(|g| g.norm_sqr()).sum::<f64>() / gains.len() as f64;
    if mean_power > 0.0 {
        let scale = mean_power.sqrt().recip();
        gains.iter_mut().for_each(|g| *g *= scale);
    }

    Ok(ChannelRealization {
        gains,
        noise_variance: snr_to_noise_variance(snr_db),
        scenario: scenario.clone(),
        snr_db,
    })
}

impl ChannelRealization {
    /// Flat unit-gain channel (pure AWGN) at the given SNR.
    pub fn flat(snr_db: f64) -> Result<Self> {
        check_snr(snr_db)?;
        Ok(Self {
            gains: vec![Complex64::new(1.0, 0.0); GRID_SYMBOLS * GRID_SUBCARRIERS],
            noise_variance: snr_to_noise_variance(snr_db),
            scenario: Scenario::new("Flat", 1, 0.0, 0.0)?,
            snr_db,
        })
    }

    /// Builds a realization from explicit gains (row-major).
    pub fn from_gains(gains: Vec<Complex64>, snr_db: f64, scenario: Scenario) -> Result<Self> {
        check_snr(snr_db)?;
        if gains.len() != GRID_SYMBOLS * GRID_SUBCARRIERS {
            return Err(LinkError::Framing(format!(
                "expected {} gains, got {}",
                GRID_SYMBOLS * GRID_SUBCARRIERS,
                gains.len()
            )));
        }
        if gains.iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(LinkError::Contract("non-finite channel gain".into()));
        }
        Ok(Self {
            gains,
            noise_variance: snr_to_noise_variance(snr_db),
            scenario,
            snr_db,
        })
    }

    /// Overrides the noise level, e.g. to simulate a (nearly) noiseless link.
    pub fn with_noise_variance(mut self, noise_variance: f64) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(LinkError::Contract(format!("noise variance {noise_variance} must be > 0")));
        }
        self.noise_variance = noise_variance;
        Ok(self)
    }

    #[inline]
    pub fn gain(&self, t: usize, f: usize) -> Complex64 {
        self.gains[t * GRID_SUBCARRIERS + f]
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    /// Mean of `|gain|^2` over the grid.
    pub fn mean_power(&self) -> f64 {
        self.gains.iter().map(|g| g.norm_sqr()).sum::<f64>() / self.gains.len() as f64
    }
}

/// Real-valued CSI matrix fed to the policy: per-cell gain magnitude in dB
/// (clipped), with the SNR broadcast in a trailing column.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFeatures {
    /// Row-major `[GRID_SYMBOLS x CSI_COLS]`.
    values: Vec<f32>,
}

pub fn csi_features(ch: &ChannelRealization) -> CsiFeatures {
    let mut values = Vec::with_capacity(GRID_SYMBOLS * CSI_COLS);
    for t in 0..GRID_SYMBOLS {
        for f in 0..GRID_SUBCARRIERS {
            values.push(magnitude_db(ch.gain(t, f)) as f32);
        }
        values.push(ch.snr_db as f32);
    }
    CsiFeatures { values }
}

fn magnitude_db(g: Complex64) -> f64 {
    (20.0 * (g.norm() + 1e-12).log10()).clamp(CSI_DB_MIN, CSI_DB_MAX)
}

impl CsiFeatures {
    pub fn from_values(values: Vec<f32>) -> Result<Self> {
        if values.len() != GRID_SYMBOLS * CSI_COLS {
            return Err(LinkError::Framing(format!(
                "CSI needs {} values, got {}",
                GRID_SYMBOLS * CSI_COLS,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LinkError::Contract("non-finite CSI value".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, t: usize, col: usize) -> f32 {
        self.values[t * CSI_COLS + col]
    }

    pub fn snr_db(&self) -> f32 {
        self.values[GRID_SUBCARRIERS]
    }

    pub fn rows(&self) -> usize {
        GRID_SYMBOLS
    }

    pub fn cols(&self) -> usize {
        CSI_COLS
    }
}
