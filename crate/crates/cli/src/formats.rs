//! Text formats: the dataset TSV, the metrics log and the evaluation CSV.
//!
//! Dataset lines carry seven tab-separated fields with no header:
//! `index, scenario, snr_db, class, channel_seed, text, csi`, where `csi`
//! is base64 of the `16 x 65` feature matrix as little-endian `f32` in
//! row-major order.

use std::io::Write;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use linkforge_core::channel::CsiFeatures;
use linkforge_train::{DataRecord, EvalRecord};

use crate::error::{CliError, Result};

pub fn encode_csi(csi: &CsiFeatures) -> String {
    let bytes: Vec<u8> = csi.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

pub fn decode_csi(text: &str) -> std::result::Result<CsiFeatures, String> {
    let bytes = B64.decode(text.trim()).map_err(|e| format!("csi is not base64: {e}"))?;
    if bytes.len() % 4 != 0 {
        return Err("csi byte length is not a multiple of 4".into());
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    CsiFeatures::from_values(values).map_err(|e| e.to_string())
}

pub fn record_to_line(r: &DataRecord) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.index,
        r.scenario,
        r.snr_db,
        r.class,
        r.channel_seed,
        r.text,
        encode_csi(&r.csi)
    )
}

pub fn parse_record(line: &str) -> std::result::Result<DataRecord, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 7 {
        return Err(format!("expected 7 tab-separated fields, found {}", f.len()));
    }
    let num = |s: &str, what: &str| -> std::result::Result<u64, String> {
        s.parse().map_err(|_| format!("bad {what} `{s}`"))
    };
    let snr_db: f64 = f[2].parse().map_err(|_| format!("bad snr_db `{}`", f[2]))?;
    if !snr_db.is_finite() {
        return Err(format!("bad snr_db `{}`", f[2]));
    }
    Ok(DataRecord {
        index: num(f[0], "index")? as usize,
        scenario: f[1].to_string(),
        snr_db,
        class: f[3].parse().map_err(|e| format!("{e}"))?,
        channel_seed: num(f[4], "channel_seed")?,
        text: f[5].to_string(),
        csi: decode_csi(f[6])?,
    })
}

pub fn write_dataset(records: &[DataRecord], w: &mut impl Write) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", record_to_line(r))?;
    }
    Ok(())
}

pub fn parse_dataset(text: &str) -> Result<Vec<DataRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record(l).map_err(|e| CliError::Data(format!("line {}: {e}", i + 1))))
        .collect()
}

pub const EVAL_HEADER: [&str; 9] = [
    "scenario",
    "snr_db",
    "class",
    "method",
    "ber",
    "goodput",
    "complexity",
    "reward",
    "wall_time_s",
];

pub fn write_eval_csv(rows: &[EvalRecord], w: impl Write) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EVAL_HEADER)?;
    for r in rows {
        out.write_record([
            r.scenario.clone(),
            r.snr_db.to_string(),
            r.class.to_string(),
            r.method.to_string(),
            r.ber.to_string(),
            r.goodput.to_string(),
            r.complexity.to_string(),
            r.reward.to_string(),
            r.wall_time_s.map_or_else(|| "NA".to_string(), |t| t.to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use linkforge_core::ScenarioSet;
    use linkforge_train::generate_dataset;

    #[test]
    fn dataset_lines_round_trip_exactly() {
        let data = generate_dataset(30, &ScenarioSet::default(), 4).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed = parse_dataset(&text).unwrap();
        assert_eq!(parsed, data);
        let mut again = Vec::new();
        write_dataset(&parsed, &mut again).unwrap();
        assert_eq!(again, text.as_bytes());
    }

    #[test]
    fn malformed_lines_are_reported() {
        assert!(parse_record("1\tUrban\t5").is_err());
        assert!(parse_record("x\tUrban\t5\tLowBER\t1\thi\tAAAA").is_err());
        assert!(parse_record("1\tUrban\t5\tLowBER\t1\thi\tAAAA").is_err());
        assert!(parse_dataset("garbage\n").is_err());
    }
}
