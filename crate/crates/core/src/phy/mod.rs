//! End-to-end link simulation.
//!
//! One call to [`simulate_link`] pushes a payload through the configured
//! chain: CRC-16 attach, channel coding, chip spreading, modulation, power
//! scaling, resource mapping, the fading channel with AWGN, channel
//! estimation, equalization, demapping, despreading, decoding and the
//! Chase-combining HARQ loop.

pub mod coding;
pub mod modulation;

use crc::{Crc, CRC_16_IBM_3740};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::action::{Equalization, Estimation, LinkConfig, PILOT_SPACING};
use crate::channel::{ChannelRealization, GRID_SYMBOLS};
use crate::error::{LinkError, Result};

pub use coding::{decode, encode};
pub use modulation::{demodulate, modulate};

/// Default information payload length in bits.
pub const DEFAULT_PAYLOAD_BITS: usize = 1024;

pub const CRC_BITS: usize = 16;

/// CRC-16/CCITT (polynomial 0x1021, init 0xFFFF).
const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    bits: Vec<u8>,
}

impl Payload {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() || bits.len() % 8 != 0 {
            return Err(LinkError::Framing(format!(
                "payload length {} must be positive and a multiple of 8",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(LinkError::Framing("payload bits must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    /// Uniform random payload, deterministic in `seed`.
    pub fn random(len: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self::new((0..len).map(|_| rng.random_range(0..2u8)).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Measured outcome of one transmission (possibly with retransmissions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub ber: f64,
    /// Delivered information bits per channel use.
    pub goodput: f64,
    pub complexity: f64,
    pub avg_transmissions: f64,
}

fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b))
        .collect()
}

/// CRC-16 over a bit string whose length is a multiple of 8, as 16 bits MSB first.
pub fn crc16_bits(bits: &[u8]) -> [u8; CRC_BITS] {
    let crc = CRC16.checksum(&pack_bits(bits));
    std::array::from_fn(|i| ((crc >> (15 - i)) & 1) as u8)
}

/// Resource grid layout for one configuration: which subcarriers carry
/// pilots and which carry data.
#[derive(Debug, Clone)]
struct ResourceMap {
    allocated: usize,
    data_subcarriers: Vec<usize>,
    pilot_subcarriers: Vec<usize>,
}

impl ResourceMap {
    fn new(config: &LinkConfig) -> Self {
        let allocated = config.allocation.subcarriers();
        let (pilot_subcarriers, data_subcarriers) = match config.estimation {
            Estimation::Perfect => (Vec::new(), (0..allocated).collect()),
            Estimation::LsPilot => (0..allocated).partition(|f| f % PILOT_SPACING == 0),
        };
        Self {
            allocated,
            data_subcarriers,
            pilot_subcarriers,
        }
    }

    fn data_cells_per_frame(&self) -> usize {
        GRID_SYMBOLS * self.data_subcarriers.len()
    }

    /// Grid cell of the i-th data symbol. Streams longer than one frame wrap
    /// onto the next frame over the same channel grid.
    #[inline]
    fn cell(&self, i: usize) -> (usize, usize) {
        let per_row = self.data_subcarriers.len();
        let p = i % self.data_cells_per_frame();
        (p / per_row, self.data_subcarriers[p % per_row])
    }
}

/// Checks that one frame of the configured allocation can carry at least
/// one whole coded block after spreading.
pub fn check_feasible(config: &LinkConfig) -> Result<()> {
    let map = ResourceMap::new(config);
    let block_chips = coding::coded_block_len(config.coding) * config.spreading.factor();
    let block_symbols = block_chips.div_ceil(config.modulation.bits_per_symbol());
    feasible(map.data_cells_per_frame(), block_symbols)
        .map_err(|e| LinkError::Infeasible(format!("{config}: {e}")))
}

fn feasible(data_cells: usize, block_symbols: usize) -> std::result::Result<(), String> {
    if data_cells < block_symbols {
        Err(format!(
            "allocation carries {data_cells} data symbols per frame, one coded block needs {block_symbols}"
        ))
    } else {
        Ok(())
    }
}

fn spread(bits: &[u8], sf: usize) -> Vec<u8> {
    if sf == 1 {
        return bits.to_vec();
    }
    bits.iter().flat_map(|&b| std::iter::repeat_n(b, sf)).collect()
}

/// Sums the chip signs of each bit; a tied vote falls back to the first chip.
fn despread(chips: &[u8], sf: usize) -> Vec<u8> {
    if sf == 1 {
        return chips.to_vec();
    }
    chips
        .chunks_exact(sf)
        .map(|c| {
            let vote: i32 = c.iter().map(|&b| 1 - 2 * b as i32).sum();
            match vote.cmp(&0) {
                std::cmp::Ordering::Greater => 0,
                std::cmp::Ordering::Less => 1,
                std::cmp::Ordering::Equal => c[0],
            }
        })
        .collect()
}

/// Channel estimates (scaled by the transmit amplitude) for every allocated
/// cell, row-major `[GRID_SYMBOLS x allocated]`.
fn estimate_channel(
    config: &LinkConfig,
    map: &ResourceMap,
    ch: &ChannelRealization,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Complex64> {
    let alloc = map.allocated;
    let mut est = vec![Complex64::new(0.0, 0.0); GRID_SYMBOLS * alloc];
    match config.estimation {
        Estimation::Perfect => {
            for t in 0..GRID_SYMBOLS {
                for f in 0..alloc {
                    est[t * alloc + f] = ch.gain(t, f) * amplitude;
                }
            }
        }
        Estimation::LsPilot => {
            let sigma = (ch.noise_variance / 2.0).sqrt();
            let pilots = &map.pilot_subcarriers;
            let mut at_pilot = vec![Complex64::new(0.0, 0.0); pilots.len()];
            for t in 0..GRID_SYMBOLS {
                // Pilot symbol is the transmit amplitude itself; the LS
                // estimate of the effective gain is the received sample.
                for (slot, &f) in at_pilot.iter_mut().zip(pilots) {
                    *slot = ch.gain(t, f) * amplitude + noise(rng, sigma);
                }
                for f in 0..alloc {
                    let k = f / PILOT_SPACING;
                    let value = if k + 1 < pilots.len() {
                        let w = (f - pilots[k]) as f64 / PILOT_SPACING as f64;
                        at_pilot[k] * (1.0 - w) + at_pilot[k + 1] * w
                    } else {
                        at_pilot[pilots.len() - 1]
                    };
                    est[t * alloc + f] = value;
                }
            }
        }
    }
    est
}

#[inline]
fn noise(rng: &mut ChaCha8Rng, sigma: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * sigma, im * sigma)
}

#[inline]
fn equalize(y: Complex64, h: Complex64, eq: Equalization, noise_variance: f64) -> Complex64 {
    let p = h.norm_sqr();
    match eq {
        Equalization::Zf => {
            if p > 0.0 {
                y * h.conj() / p
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        Equalization::Mmse => y * h.conj() / (p + noise_variance),
    }
}

/// Simulates one end-to-end transmission of `payload` with the given
/// configuration over `ch`. Noise draws are deterministic in `seed`.
pub fn simulate_link(
    config: &LinkConfig,
    ch: &ChannelRealization,
    payload: &Payload,
    seed: u64,
) -> Result<LinkMetrics> {
    check_feasible(config)?;

    let mut info = payload.bits().to_vec();
    info.extend_from_slice(&crc16_bits(payload.bits()));
    let info_len = info.len();

    let coded = encode(&info, config.coding);
    let sf = config.spreading.factor();
    let mut chips = spread(&coded, sf);
    let chip_len = chips.len();
    let bps = config.modulation.bits_per_symbol();
    chips.resize(chip_len.div_ceil(bps) * bps, 0);

    let amplitude = config.power.fraction().sqrt();
    let tx: Vec<Complex64> = modulate(&chips, config.modulation)?
        .into_iter()
        .map(|s| s * amplitude)
        .collect();

    let map = ResourceMap::new(config);
    let cells: Vec<(usize, usize)> = (0..tx.len()).map(|i| map.cell(i)).collect();
    let sigma = (ch.noise_variance / 2.0).sqrt();
    let max_tx = 1 + config.harq.max_extra_transmissions();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut combined = vec![Complex64::new(0.0, 0.0); tx.len()];
    let mut decoded = Vec::new();
    let mut success = false;
    let mut transmissions = 0;

    while transmissions < max_tx {
        transmissions += 1;
        let est = estimate_channel(config, &map, ch, amplitude, &mut rng);
        for ((acc, &s), &(t, f)) in combined.iter_mut().zip(&tx).zip(&cells) {
            let y = ch.gain(t, f) * s + noise(&mut rng, sigma);
            *acc += equalize(y, est[t * map.allocated + f], config.equalization, ch.noise_variance);
        }
        let scale = 1.0 / transmissions as f64;
        let averaged: Vec<Complex64> = combined.iter().map(|c| c * scale).collect();

        let mut rx_chips = demodulate(&averaged, config.modulation);
        rx_chips.truncate(chip_len);
        let rx_coded = despread(&rx_chips, sf);
        decoded = decode(&rx_coded, config.coding, info_len)?;

        let (data, crc) = decoded.split_at(payload.len());
        success = crc16_bits(data) == crc;
        if success {
            break;
        }
    }

    let errors = decoded[..payload.len()]
        .iter()
        .zip(payload.bits())
        .filter(|(a, b)| a != b)
        .count();
    let ber = errors as f64 / payload.len() as f64;
    let goodput = if success {
        config.nominal_rate() / transmissions as f64
    } else {
        0.0
    };

    Ok(LinkMetrics {
        ber,
        goodput,
        complexity: config.complexity_cost() as f64,
        avg_transmissions: transmissions as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::*;

    #[test]
    fn payload_validation() {
        assert!(Payload::new(vec![]).is_err());
        assert!(Payload::new(vec![0; 12]).is_err());
        assert!(Payload::new(vec![2; 8]).is_err());
        assert_eq!(Payload::random(64, 3).unwrap(), Payload::random(64, 3).unwrap());
    }

    #[test]
    fn crc_detects_single_flip() {
        let p = Payload::random(128, 1).unwrap();
        let crc = crc16_bits(p.bits());
        let mut bad = p.bits().to_vec();
        bad[77] ^= 1;
        assert_ne!(crc16_bits(&bad), crc);
        // CRC-16/CCITT-FALSE check value for "123456789".
        let msg: Vec<u8> = b"123456789"
            .iter()
            .flat_map(|byte| (0..8).rev().map(move |k| (byte >> k) & 1))
            .collect();
        let bits = crc16_bits(&msg);
        let value = bits.iter().fold(0u16, |acc, &b| (acc << 1) | b as u16);
        assert_eq!(value, 0x29B1);
    }

    #[test]
    fn despread_votes() {
        assert_eq!(despread(&[1, 1, 0, 1], 4), vec![1]);
        assert_eq!(despread(&[0, 0, 1, 0], 4), vec![0]);
        assert_eq!(despread(&[1, 0], 2), vec![1]);
        assert_eq!(despread(&[0, 1], 2), vec![0]);
        assert_eq!(spread(&[1, 0], 2), vec![1, 1, 0, 0]);
    }

    #[test]
    fn feasibility_predicate() {
        for c in LinkConfig::all().step_by(7) {
            assert!(check_feasible(&c).is_ok());
        }
        assert!(feasible(10, 56).is_err());
        assert!(feasible(56, 56).is_ok());
    }

    #[test]
    fn noiseless_link_is_error_free() {
        let ch = ChannelRealization::flat(30.0)
            .unwrap()
            .with_noise_variance(1e-12)
            .unwrap();
        let payload = Payload::random(128, 4).unwrap();
        for c in LinkConfig::all().step_by(37) {
            let m = simulate_link(&c, &ch, &payload, 1).unwrap();
            assert_eq!(m.ber, 0.0, "{c}");
            assert_eq!(m.avg_transmissions, 1.0);
            assert_eq!(m.goodput, c.nominal_rate());
            assert_eq!(m.complexity, c.complexity_cost() as f64);
        }
    }

    #[test]
    fn pilot_interpolation_is_exact_on_flat_channel() {
        let ch = ChannelRealization::flat(30.0)
            .unwrap()
            .with_noise_variance(1e-12)
            .unwrap();
        let config = LinkConfig {
            estimation: Estimation::LsPilot,
            allocation: Allocation::Sc32,
            ..LinkConfig::default()
        };
        let map = ResourceMap::new(&config);
        assert_eq!(map.pilot_subcarriers, vec![0, 8, 16, 24]);
        assert_eq!(map.data_subcarriers.len(), 28);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let est = estimate_channel(&config, &map, &ch, 0.5, &mut rng);
        assert!(est.iter().all(|h| (h - Complex64::new(0.5, 0.0)).norm() < 1e-5));
    }

    #[test]
    fn deterministic_per_seed() {
        let ch = crate::channel::generate_channel(&crate::channel::Scenario::urban(), 3.0, 2).unwrap();
        let payload = Payload::random(256, 9).unwrap();
        let c = LinkConfig::from_indices(&[3, 1, 2, 2, 1, 1, 1, 2]).unwrap();
        let a = simulate_link(&c, &ch, &payload, 42).unwrap();
        let b = simulate_link(&c, &ch, &payload, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn harq_respects_maximum() {
        let ch = ChannelRealization::flat(-10.0).unwrap();
        let payload = Payload::random(64, 1).unwrap();
        for harq in Harq::ALL {
            let c = LinkConfig {
                harq: *harq,
                modulation: Modulation::Qam64,
                ..LinkConfig::default()
            };
            let m = simulate_link(&c, &ch, &payload, 5).unwrap();
            assert_eq!(m.avg_transmissions, (1 + harq.max_extra_transmissions()) as f64);
            assert_eq!(m.goodput, 0.0);
            assert!(m.ber > 0.0 && m.ber <= 1.0);
        }
    }
}
