//! Channel codes: repetition, systematic Hamming(7,4), and the terminated
//! rate-1/2 K=7 convolutional code (generators 133/171 octal) with a
//! hard-decision Viterbi decoder.
//!
//! Bits are `u8` values in {0, 1}.

use crate::action::Coding;
use crate::error::{LinkError, Result};

const CONV_K: usize = 7;
const CONV_MEMORY: usize = CONV_K - 1;
const CONV_STATES: usize = 1 << CONV_MEMORY;
const CONV_G1: u32 = 0o133;
const CONV_G2: u32 = 0o171;

/// Parity bits of the systematic Hamming(7,4) code, one row per data bit.
const HAMMING_P: [[u8; 3]; 4] = [[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]];

/// Information bits consumed per code block.
fn info_block(coding: Coding) -> usize {
    match coding {
        Coding::Hamming74 => 4,
        _ => 1,
    }
}

/// Number of coded bits produced for `info_len` information bits,
/// including zero padding to the block boundary and the trellis tail.
pub fn coded_len(info_len: usize, coding: Coding) -> usize {
    match coding {
        Coding::Uncoded => info_len,
        Coding::Rep3 => 3 * info_len,
        Coding::Rep5 => 5 * info_len,
        Coding::Hamming74 => 7 * info_len.div_ceil(4),
        Coding::ConvR12 => 2 * (info_len + CONV_MEMORY),
    }
}

/// Zero bits appended to reach a whole number of code blocks.
pub fn padding(info_len: usize, coding: Coding) -> usize {
    let block = info_block(coding);
    info_len.div_ceil(block) * block - info_len
}

/// Smallest unit the decoder operates on, in coded bits.
pub fn coded_block_len(coding: Coding) -> usize {
    match coding {
        Coding::Uncoded => 1,
        Coding::Rep3 => 3,
        Coding::Rep5 => 5,
        Coding::Hamming74 => 7,
        Coding::ConvR12 => 2,
    }
}

pub fn encode(bits: &[u8], coding: Coding) -> Vec<u8> {
    match coding {
        Coding::Uncoded => bits.to_vec(),
        Coding::Rep3 => repeat(bits, 3),
        Coding::Rep5 => repeat(bits, 5),
        Coding::Hamming74 => {
            let mut out = Vec::with_capacity(coded_len(bits.len(), coding));
            for chunk in bits.chunks(4) {
                let mut d = [0u8; 4];
                d[..chunk.len()].copy_from_slice(chunk);
                out.extend_from_slice(&hamming_encode_block(d));
            }
            out
        }
        Coding::ConvR12 => conv_encode(bits),
    }
}

/// Decodes hard bits back to `info_len` information bits (padding stripped).
pub fn decode(received: &[u8], coding: Coding, info_len: usize) -> Result<Vec<u8>> {
    let expected = coded_len(info_len, coding);
    if received.len() != expected {
        return Err(LinkError::Framing(format!(
            "{coding}: expected {expected} coded bits for {info_len} info bits, got {}",
            received.len()
        )));
    }
    let mut out = match coding {
        Coding::Uncoded => received.to_vec(),
        Coding::Rep3 => majority(received, 3),
        Coding::Rep5 => majority(received, 5),
        Coding::Hamming74 => received
            .chunks_exact(7)
            .flat_map(|c| hamming_decode_block(c.try_into().unwrap()))
            .collect(),
        Coding::ConvR12 => viterbi_decode(received, info_len),
    };
    out.truncate(info_len);
    Ok(out)
}

fn repeat(bits: &[u8], k: usize) -> Vec<u8> {
    bits.iter().flat_map(|&b| std::iter::repeat_n(b, k)).collect()
}

fn majority(bits: &[u8], k: usize) -> Vec<u8> {
    bits.chunks_exact(k)
        .map(|c| u8::from(c.iter().map(|&b| b as usize).sum::<usize>() * 2 > k))
        .collect()
}

pub(crate) fn hamming_encode_block(d: [u8; 4]) -> [u8; 7] {
    let mut p = [0u8; 3];
    for (row, &bit) in HAMMING_P.iter().zip(&d) {
        for j in 0..3 {
            p[j] ^= row[j] & bit;
        }
    }
    [d[0], d[1], d[2], d[3], p[0], p[1], p[2]]
}

fn hamming_decode_block(c: [u8; 7]) -> [u8; 4] {
    let mut s = [c[4], c[5], c[6]];
    for (row, &bit) in HAMMING_P.iter().zip(&c[..4]) {
        for j in 0..3 {
            s[j] ^= row[j] & bit;
        }
    }
    let mut d = [c[0], c[1], c[2], c[3]];
    if s != [0, 0, 0] {
        // Syndrome equal to a data column flips that data bit; a unit syndrome
        // points at a parity bit and leaves the data untouched.
        if let Some(pos) = HAMMING_P.iter().position(|row| *row == s) {
            d[pos] ^= 1;
        }
    }
    d
}

#[inline]
fn conv_outputs(state: usize, input: u8) -> (u8, u8) {
    let reg = ((input as u32) << CONV_MEMORY) | state as u32;
    (
        ((reg & CONV_G1).count_ones() & 1) as u8,
        ((reg & CONV_G2).count_ones() & 1) as u8,
    )
}

fn conv_encode(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * (bits.len() + CONV_MEMORY));
    let mut state = 0usize;
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, CONV_MEMORY)) {
        let (o1, o2) = conv_outputs(state, b);
        out.push(o1);
        out.push(o2);
        state = ((b as usize) << (CONV_MEMORY - 1)) | (state >> 1);
    }
    out
}

fn viterbi_decode(received: &[u8], info_len: usize) -> Vec<u8> {
    let steps = received.len() / 2;
    // outputs[state][input] packed as 2-bit symbol.
    let outputs: Vec<[u8; 2]> = (0..CONV_STATES)
        .map(|s| {
            let (a0, b0) = conv_outputs(s, 0);
            let (a1, b1) = conv_outputs(s, 1);
            [(a0 << 1) | b0, (a1 << 1) | b1]
        })
        .collect();

    const INF: u32 = u32::MAX / 2;
    let mut metric = [INF; CONV_STATES];
    metric[0] = 0;
    // decisions[step] bit `ns` = which predecessor (low bit) won for state ns.
    let mut decisions = vec![0u64; steps];

    for (step, pair) in received.chunks_exact(2).enumerate() {
        let rx = (pair[0] << 1) | pair[1];
        let mut next = [INF; CONV_STATES];
        let mut dec = 0u64;
        for (ns, slot) in next.iter_mut().enumerate() {
            let input = (ns >> (CONV_MEMORY - 1)) as u8;
            let base = (ns << 1) & (CONV_STATES - 1);
            let cost = |s: usize| metric[s] + (outputs[s][input as usize] ^ rx).count_ones();
            let (c0, c1) = (cost(base), cost(base | 1));
            if c1 < c0 {
                *slot = c1;
                dec |= 1 << ns;
            } else {
                *slot = c0;
            }
        }
        metric = next;
        decisions[step] = dec;
    }

    let mut bits = vec![0u8; steps];
    let mut state = 0usize;
    for step in (0..steps).rev() {
        bits[step] = (state >> (CONV_MEMORY - 1)) as u8;
        let low = ((decisions[step] >> state) & 1) as usize;
        state = ((state << 1) & (CONV_STATES - 1)) | low;
    }
    bits.truncate(info_len);
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_examples() {
        assert_eq!(encode(&[0, 0, 0, 0], Coding::Hamming74), vec![0; 7]);
        assert_eq!(encode(&[1], Coding::Rep3), vec![1, 1, 1]);
        assert_eq!(decode(&[1, 0, 1], Coding::Rep3, 1).unwrap(), vec![1]);
        assert_eq!(decode(&[0, 1, 0, 0, 1], Coding::Rep5, 1).unwrap(), vec![0]);
    }

    #[test]
    fn hamming_matches_generator_matrix() {
        // G = [I4 | P] multiplied over GF(2).
        let g: [[u8; 7]; 4] = [
            [1, 0, 0, 0, 1, 1, 0],
            [0, 1, 0, 0, 1, 0, 1],
            [0, 0, 1, 0, 0, 1, 1],
            [0, 0, 0, 1, 1, 1, 1],
        ];
        for word in 0..16u8 {
            let d: Vec<u8> = (0..4).map(|i| (word >> (3 - i)) & 1).collect();
            let mut expected = [0u8; 7];
            for (i, &bit) in d.iter().enumerate() {
                for j in 0..7 {
                    expected[j] ^= bit & g[i][j];
                }
            }
            assert_eq!(encode(&d, Coding::Hamming74), expected.to_vec());
        }
        assert_eq!(encode(&[1, 0, 1, 1], Coding::Hamming74), vec![1, 0, 1, 1, 0, 1, 0]);
    }

    #[test]
    fn hamming_pads_partial_block() {
        let coded = encode(&[1, 1], Coding::Hamming74);
        assert_eq!(coded.len(), 7);
        assert_eq!(padding(2, Coding::Hamming74), 2);
        assert_eq!(decode(&coded, Coding::Hamming74, 2).unwrap(), vec![1, 1]);
    }

    #[test]
    fn length_mismatch_is_framing_error() {
        assert!(matches!(
            decode(&[0; 6], Coding::Hamming74, 4),
            Err(LinkError::Framing(_))
        ));
        assert!(decode(&[0; 4], Coding::Rep3, 1).is_err());
        assert!(decode(&[0; 10], Coding::ConvR12, 4).is_err());
    }

    #[test]
    fn conv_known_impulse_response() {
        // A single 1 followed by the tail traces out the generator taps.
        let coded = encode(&[1], Coding::ConvR12);
        let g1: Vec<u8> = (0..7).map(|i| ((CONV_G1 >> (6 - i)) & 1) as u8).collect();
        let g2: Vec<u8> = (0..7).map(|i| ((CONV_G2 >> (6 - i)) & 1) as u8).collect();
        let interleaved: Vec<u8> = g1.iter().zip(&g2).flat_map(|(&a, &b)| [a, b]).collect();
        assert_eq!(coded, interleaved);
    }

    #[test]
    fn viterbi_corrects_scattered_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bits: Vec<u8> = (0..200).map(|_| rng.random_range(0..2)).collect();
        let mut coded = encode(&bits, Coding::ConvR12);
        for pos in (10..coded.len()).step_by(40) {
            coded[pos] ^= 1;
        }
        assert_eq!(decode(&coded, Coding::ConvR12, bits.len()).unwrap(), bits);
    }

    #[test]
    fn round_trip_all_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &coding in Coding::ALL {
            for len in [1usize, 3, 8, 37, 256] {
                let bits: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
                let coded = encode(&bits, coding);
                assert_eq!(coded.len(), coded_len(len, coding));
                assert_eq!(decode(&coded, coding, len).unwrap(), bits, "{coding} len {len}");
            }
        }
    }
}
