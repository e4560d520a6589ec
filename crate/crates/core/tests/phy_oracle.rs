use linkforge_core::action::*;
use linkforge_core::phy::coding::{decode, encode};
use linkforge_core::*;
use statrs::function::erf::erfc;

fn q(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn config(c: Coding, m: Modulation, est: Estimation, eq: Equalization) -> LinkConfig {
    LinkConfig {
        coding: c,
        spreading: Spreading::Sf1,
        modulation: m,
        power: Power::Full,
        allocation: Allocation::Sc64,
        estimation: est,
        equalization: eq,
        harq: Harq::Off,
    }
}

fn mean_ber(cfg: &LinkConfig, ch: &ChannelRealization, runs: u64, bits: usize) -> f64 {
    (0..runs)
        .map(|s| {
            let p = Payload::random(bits, 1000 + s).unwrap();
            simulate_link(cfg, ch, &p, s).unwrap().ber
        })
        .sum::<f64>()
        / runs as f64
}

#[test]
fn bpsk_awgn_matches_q_function() {
    let cfg = config(Coding::Uncoded, Modulation::Bpsk, Estimation::Perfect, Equalization::Zf);
    for snr in [0.0, 2.0, 4.0] {
        let ch = ChannelRealization::flat(snr).unwrap();
        let runs = 100;
        let bits = 1024;
        let ber = mean_ber(&cfg, &ch, runs, bits);
        let snr_lin = 10f64.powf(snr / 10.0);
        let expected = q((2.0 * snr_lin).sqrt());
        let n = (runs as usize * bits) as f64;
        let se = (expected * (1.0 - expected) / n).sqrt();
        assert!(
            (ber - expected).abs() < 3.0 * se,
            "snr {snr}: ber {ber} vs {expected} (se {se})"
        );
    }
}

#[test]
fn q_function_reference_points() {
    assert!((q(2f64.sqrt()) - 0.0786).abs() < 1e-4);
    let x = (2.0 * 10f64.powf(0.4)).sqrt();
    assert!((q(x) - 0.0125).abs() < 1e-4);
}

#[test]
fn coding_lowers_ber_at_moderate_snr() {
    let ch = ChannelRealization::flat(2.0).unwrap();
    let uncoded = mean_ber(
        &config(Coding::Uncoded, Modulation::Bpsk, Estimation::Perfect, Equalization::Zf),
        &ch,
        20,
        512,
    );
    for c in [Coding::Rep3, Coding::Rep5, Coding::ConvR12] {
        let coded = mean_ber(&config(c, Modulation::Bpsk, Estimation::Perfect, Equalization::Zf), &ch, 20, 512);
        assert!(coded < uncoded, "{c}: {coded} >= {uncoded}");
    }
}

#[test]
fn zf_and_mmse_agree_on_bpsk_flat_channel() {
    // A real positive scaling never flips a BPSK decision.
    let ch = ChannelRealization::flat(1.0).unwrap();
    let zf = mean_ber(&config(Coding::Uncoded, Modulation::Bpsk, Estimation::Perfect, Equalization::Zf), &ch, 10, 512);
    let mmse = mean_ber(&config(Coding::Uncoded, Modulation::Bpsk, Estimation::Perfect, Equalization::Mmse), &ch, 10, 512);
    assert_eq!(zf, mmse);
}

#[test]
fn ber_falls_with_snr() {
    let cfg = config(Coding::Uncoded, Modulation::Qam16, Estimation::Perfect, Equalization::Zf);
    let mut prev = f64::INFINITY;
    for snr in [-5.0, 0.0, 5.0, 10.0, 15.0] {
        let ch = ChannelRealization::flat(snr).unwrap();
        let ber = mean_ber(&cfg, &ch, 10, 512);
        assert!(ber < prev, "snr {snr}: {ber} !< {prev}");
        prev = ber;
    }
}

#[test]
fn hamming_corrects_every_single_error() {
    for word in 0..16u8 {
        let info: Vec<u8> = (0..4).map(|i| (word >> i) & 1).collect();
        let code = encode(&info, Coding::Hamming74);
        assert_eq!(code.len(), 7);
        for e in 0..7 {
            let mut rx = code.clone();
            rx[e] ^= 1;
            assert_eq!(decode(&rx, Coding::Hamming74, 4).unwrap(), info);
        }
    }
}

#[test]
fn repetition_majority_is_exact() {
    for (c, n) in [(Coding::Rep3, 3usize), (Coding::Rep5, 5)] {
        for pattern in 0..(1u32 << n) {
            let rx: Vec<u8> = (0..n).map(|i| ((pattern >> i) & 1) as u8).collect();
            let ones = rx.iter().filter(|&&b| b == 1).count();
            let expected = u8::from(2 * ones > n);
            assert_eq!(decode(&rx, c, 1).unwrap(), vec![expected]);
        }
    }
}

#[test]
fn viterbi_noiseless_round_trip() {
    for seed in 0..10_000u64 {
        let p = Payload::random(64, seed).unwrap();
        let code = encode(p.bits(), Coding::ConvR12);
        assert_eq!(decode(&code, Coding::ConvR12, 64).unwrap(), p.bits());
    }
}
