//! Gray-mapped BPSK / QPSK / 16-QAM / 64-QAM with unit average symbol energy
//! and per-symbol maximum-likelihood hard demapping.
//!
//! Square QAM is built from two Gray-coded PAM axes: the first half of each
//! symbol's bits selects the in-phase level, the second half the quadrature.

use num_complex::Complex64;

use crate::action::Modulation;
use crate::error::{LinkError, Result};

/// Bits per axis and the energy normalization for the constellation.
fn axis_params(m: Modulation) -> (usize, f64) {
    match m {
        Modulation::Bpsk => (1, 1.0),
        Modulation::Qpsk => (1, 2.0f64.sqrt()),
        Modulation::Qam16 => (2, 10.0f64.sqrt()),
        Modulation::Qam64 => (3, 42.0f64.sqrt()),
    }
}

#[inline]
fn pam_level(bits: &[u8]) -> f64 {
    // Gray -> binary index, MSB first.
    let mut idx = 0usize;
    let mut acc = 0u8;
    for &b in bits {
        acc ^= b;
        idx = (idx << 1) | acc as usize;
    }
    let levels = 1usize << bits.len();
    (2 * idx) as f64 - (levels - 1) as f64
}

#[inline]
fn pam_slice(x: f64, nbits: usize, out: &mut Vec<u8>) {
    let levels = 1usize << nbits;
    let idx = ((x + (levels - 1) as f64) / 2.0).round().clamp(0.0, (levels - 1) as f64) as usize;
    let gray = idx ^ (idx >> 1);
    for k in (0..nbits).rev() {
        out.push(((gray >> k) & 1) as u8);
    }
}

pub fn modulate(bits: &[u8], m: Modulation) -> Result<Vec<Complex64>> {
    let bps = m.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(LinkError::Framing(format!(
            "{m}: {} bits is not a multiple of {bps}",
            bits.len()
        )));
    }
    let (axis_bits, norm) = axis_params(m);
    let symbols = bits
        .chunks_exact(bps)
        .map(|c| match m {
            // 0 -> +1, 1 -> -1
            Modulation::Bpsk => Complex64::new(1.0 - 2.0 * c[0] as f64, 0.0),
            _ => {
                // Axis Gray maps send bit 0 to the negative side; flip so
                // that a 0 bit maps to the positive half-plane like BPSK.
                let re = -pam_level(&c[..axis_bits]);
                let im = -pam_level(&c[axis_bits..]);
                Complex64::new(re / norm, im / norm)
            }
        })
        .collect();
    Ok(symbols)
}

pub fn demodulate(symbols: &[Complex64], m: Modulation) -> Vec<u8> {
    let (axis_bits, norm) = axis_params(m);
    let mut out = Vec::with_capacity(symbols.len() * m.bits_per_symbol());
    for s in symbols {
        match m {
            Modulation::Bpsk => out.push(u8::from(s.re < 0.0)),
            _ => {
                pam_slice(-s.re * norm, axis_bits, &mut out);
                pam_slice(-s.im * norm, axis_bits, &mut out);
            }
        }
    }
    out
}
