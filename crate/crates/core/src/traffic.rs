//! Packet traces and the per-observation feature matrix.
//!
//! A trace is a list of packets (PU, timestamp, length). For every PU the
//! `r`-th observation is the triple (length of packet `r`, gap between
//! packets `r` and `r + 1`, population variance of the first `r` lengths).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One captured packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub pu_id: u32,
    /// Seconds.
    pub timestamp: f64,
    /// Bytes.
    pub length: f64,
    /// Generating pattern, known only for synthetic traces.
    pub true_pattern: Option<usize>,
}

/// Mean statistics of a traffic class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    /// Bytes.
    pub mean_length: f64,
    /// Seconds.
    pub mean_interarrival: f64,
    /// Bytes squared.
    pub length_variance: f64,
    /// Share of PUs carrying this pattern.
    pub portion: f64,
}

impl PatternSpec {
    pub fn voip() -> Self {
        Self {
            mean_length: 210.0,
            mean_interarrival: 72.4e-6,
            length_variance: 0.0,
            portion: 1.0 / 6.0,
        }
    }

    pub fn game() -> Self {
        Self {
            mean_length: 69.27,
            mean_interarrival: 67_381e-6,
            length_variance: 352.46,
            portion: 1.0 / 3.0,
        }
    }

    pub fn udp() -> Self {
        Self {
            mean_length: 1512.0,
            mean_interarrival: 3_034e-6,
            length_variance: 0.0,
            portion: 0.5,
        }
    }

    /// VoIP, Game and UDP with the measured means and portions matching
    /// densities 0.005, 0.01 and 0.015.
    pub fn reference_set() -> [Self; 3] {
        [Self::voip(), Self::game(), Self::udp()]
    }

    /// Fraction of time the channel carries this pattern when each packet
    /// occupies `8 * length / link_rate` seconds.
    pub fn duty_cycle(&self, link_rate: f64) -> f64 {
        (8.0 * self.mean_length / link_rate / self.mean_interarrival).clamp(0.0, 1.0)
    }

    pub fn with_portion(mut self, portion: f64) -> Self {
        self.portion = portion;
        self
    }
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a `pu_id,timestamp,length[,true_pattern]` trace. A header row is
/// optional. Records come back grouped by PU and in time order.
pub fn parse_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    parse_trace_from(File::open(path)?)
}

pub fn parse_trace_from(reader: impl Read) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut by_pu: BTreeMap<u32, Vec<TraceRecord>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && row.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if row.len() < 3 || row.len() > 4 {
            return Err(parse_err(
                line,
                format!("expected 3 or 4 fields, found {}", row.len()),
            ));
        }
        let pu_id: u32 = row[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad pu_id {:?}", &row[0])))?;
        let timestamp: f64 = row[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad timestamp {:?}", &row[1])))?;
        let length: f64 = row[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad length {:?}", &row[2])))?;
        let true_pattern = match row.get(3) {
            Some(f) if !f.is_empty() => Some(
                f.parse()
                    .map_err(|_| parse_err(line, format!("bad true_pattern {f:?}")))?,
            ),
            _ => None,
        };
        if !timestamp.is_finite() {
            return Err(parse_err(line, "timestamp must be finite"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Validation(format!(
                "line {line}: packet length must be positive, got {length}"
            )));
        }
        let list = by_pu.entry(pu_id).or_default();
        if let Some(prev) = list.last() {
            if timestamp < prev.timestamp {
                return Err(Error::Validation(format!(
                    "line {line}: timestamp {timestamp} precedes {} for PU {pu_id}",
                    prev.timestamp
                )));
            }
        }
        list.push(TraceRecord {
            pu_id,
            timestamp,
            length,
            true_pattern,
        });
    }
    Ok(by_pu.into_values().flatten().collect())
}

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    write_trace_to(File::create(path)?, records)
}

pub fn write_trace_to(writer: impl Write, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pu_id", "timestamp", "length", "true_pattern"])?;
    for r in records {
        w.write_record([
            r.pu_id.to_string(),
            r.timestamp.to_string(),
            r.length.to_string(),
            r.true_pattern.map(|k| k.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Packets of one PU, in time order.
pub fn group_by_pu(records: &[TraceRecord]) -> BTreeMap<u32, Vec<TraceRecord>> {
    let mut map: BTreeMap<u32, Vec<TraceRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.pu_id).or_default().push(*r);
    }
    for list in map.values_mut() {
        list.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    }
    map
}

/// `R x 3N` feature matrix, one column triple per PU.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pu_ids: Vec<u32>,
    rows: usize,
    /// Row-major values.
    data: Vec<f64>,
}

impl ObservationMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        3 * self.pu_ids.len()
    }

    pub fn pu_ids(&self) -> &[u32] {
        &self.pu_ids
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    /// (length, interarrival, variance) of PU index `pu` at observation `row`.
    pub fn features(&self, row: usize, pu: usize) -> [f64; 3] {
        let base = row * self.cols() + 3 * pu;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    /// Every (PU, observation) triple as a point, PU-major: entry
    /// `pu * rows + row`.
    pub fn feature_points(&self) -> Vec<[f64; 3]> {
        (0..self.pu_ids.len())
            .flat_map(|pu| (0..self.rows).map(move |row| (pu, row)))
            .map(|(pu, row)| self.features(row, pu))
            .collect()
    }

    /// Copy with every column shifted to zero mean and scaled to unit
    /// variance. Constant columns are only centred.
    pub fn standardized(&self) -> Self {
        let cols = self.cols();
        let mut out = self.clone();
        for c in 0..cols {
            let n = self.rows as f64;
            let mean = (0..self.rows).map(|r| self.get(r, c)).sum::<f64>() / n;
            let var = (0..self.rows)
                .map(|r| (self.get(r, c) - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for r in 0..self.rows {
                out.data[r * cols + c] = (self.get(r, c) - mean) / sd;
            }
        }
        out
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = self
            .pu_ids
            .iter()
            .flat_map(|id| {
                [
                    format!("pu{id}_len"),
                    format!("pu{id}_iat"),
                    format!("pu{id}_var"),
                ]
            })
            .collect();
        w.write_record(&header)?;
        for r in 0..self.rows {
            w.write_record((0..self.cols()).map(|c| self.get(r, c).to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the feature matrix from the first `observations + 1` packets of
/// every PU.
pub fn extract_features(records: &[TraceRecord], observations: usize) -> Result<ObservationMatrix> {
    let groups = group_by_pu(records);
    let cols = 3 * groups.len();
    let mut data = vec![0.0; observations * cols];
    for (p, (pu_id, packets)) in groups.iter().enumerate() {
        if packets.len() < observations + 1 {
            return Err(Error::Validation(format!(
                "PU {pu_id} has {} packets, need {} for {observations} observations",
                packets.len(),
                observations + 1
            )));
        }
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for r in 0..observations {
            let len = packets[r].length;
            let n = (r + 1) as f64;
            let delta = len - mean;
            mean += delta / n;
            m2 += delta * (len - mean);
            let base = r * cols + 3 * p;
            data[base] = len;
            data[base + 1] = packets[r + 1].timestamp - packets[r].timestamp;
            data[base + 2] = (m2 / n).max(0.0);
        }
    }
    Ok(ObservationMatrix {
        pu_ids: groups.keys().copied().collect(),
        rows: observations,
        data,
    })
}

/// Draws a synthetic trace of `pus` PUs with `observations + 1` packets
/// each. Pattern labels are zero-based indices into `specs`.
pub fn synthesize_trace(
    specs: &[PatternSpec],
    pus: usize,
    observations: usize,
    seed: u64,
) -> Result<Vec<TraceRecord>> {
    if pus == 0 || observations < 2 {
        return Err(Error::Domain(format!(
            "need at least one PU and two observations, got {pus} and {observations}"
        )));
    }
    for s in specs {
        if !(s.mean_length >= 1.0
            && s.mean_interarrival > 0.0
            && s.length_variance >= 0.0
            && s.portion >= 0.0)
        {
            return Err(Error::Domain(format!("invalid pattern spec {s:?}")));
        }
    }
    let chooser = WeightedIndex::new(specs.iter().map(|s| s.portion))
        .map_err(|e| Error::Domain(format!("pattern portions are degenerate: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(pus * (observations + 1));
    for pu in 0..pus {
        let k = chooser.sample(&mut rng);
        let spec = &specs[k];
        let gap = Exp::new(1.0 / spec.mean_interarrival).expect("positive rate");
        let length =
            Normal::new(spec.mean_length, spec.length_variance.sqrt()).expect("finite spread");
        let mut t = 0.0;
        for i in 0..=observations {
            if i > 0 {
                t += gap.sample(&mut rng);
            }
            let len = if spec.length_variance == 0.0 {
                spec.mean_length
            } else {
                loop {
                    let x = length.sample(&mut rng);
                    if x >= 1.0 {
                        break x;
                    }
                }
            };
            out.push(TraceRecord {
                pu_id: pu as u32,
                timestamp: t,
                length: len,
                true_pattern: Some(k),
            });
        }
    }
    Ok(out)
}

/// Generating pattern of each PU in a synthetic trace, in PU-id order.
pub fn true_labels(records: &[TraceRecord]) -> Option<Vec<usize>> {
    group_by_pu(records)
        .values()
        .map(|p| p.first().and_then(|r| r.true_pattern))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(pu: u32, t: f64, len: f64) -> TraceRecord {
        TraceRecord {
            pu_id: pu,
            timestamp: t,
            length: len,
            true_pattern: None,
        }
    }

    #[test]
    fn parses_voip_pair() {
        let recs = parse_trace_from("0,0.0,210\n0,0.0000724,210\n".as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert!((recs[1].timestamp - recs[0].timestamp - 72.4e-6).abs() < 1e-15);
    }

    #[test]
    fn empty_file_is_empty_trace() {
        assert!(parse_trace_from("".as_bytes()).unwrap().is_empty());
        assert!(parse_trace_from("pu_id,timestamp,length\n".as_bytes())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn rejects_negative_length() {
        let err = parse_trace_from("0,1.0,-5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn reports_line_of_malformed_row() {
        let err =
            parse_trace_from("pu_id,timestamp,length\n0,0,10\n0,x,10\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_time_going_backwards() {
        let err = parse_trace_from("0,1.0,10\n1,0.5,10\n0,0.5,10\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn groups_by_pu() {
        let recs = parse_trace_from("1,0,10\n0,0,20\n1,1,30,2\n".as_bytes()).unwrap();
        let ids: Vec<u32> = recs.iter().map(|r| r.pu_id).collect();
        assert_eq!(ids, vec![0, 1, 1]);
        assert_eq!(recs[2].true_pattern, Some(2));
    }

    #[test]
    fn trace_round_trip() {
        let recs = synthesize_trace(&PatternSpec::reference_set(), 4, 5, 3).unwrap();
        let mut buf = Vec::new();
        write_trace_to(&mut buf, &recs).unwrap();
        assert_eq!(parse_trace_from(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn constant_lengths_have_zero_variance() {
        let recs: Vec<_> = (0..11).map(|i| rec(0, i as f64 * 3e-3, 1512.0)).collect();
        let m = extract_features(&recs, 10).unwrap();
        assert!((0..10).all(|r| m.features(r, 0)[2] == 0.0));
    }

    #[test]
    fn single_observation_has_zero_variance() {
        let recs = vec![
            rec(0, 0.0, 60.0),
            rec(0, 1.0, 80.0),
            rec(1, 0.0, 5.0),
            rec(1, 2.0, 9.0),
        ];
        let m = extract_features(&recs, 1).unwrap();
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(0, 5), 0.0);
    }

    #[test]
    fn two_sample_variance() {
        let recs = vec![rec(0, 0.0, 60.0), rec(0, 1.0, 80.0), rec(0, 1.5, 70.0)];
        let m = extract_features(&recs, 2).unwrap();
        assert_eq!(m.features(1, 0), [80.0, 0.5, 100.0]);
    }

    #[test]
    fn names_short_pu() {
        let recs = vec![
            rec(0, 0.0, 1.0),
            rec(0, 1.0, 1.0),
            rec(0, 2.0, 1.0),
            rec(7, 0.0, 1.0),
        ];
        let err = extract_features(&recs, 2).unwrap_err();
        assert!(err.to_string().contains("PU 7"), "{err}");
    }

    #[test]
    fn csv_header_names_columns() {
        let recs = vec![rec(3, 0.0, 1.0), rec(3, 1.0, 1.0)];
        let mut buf = Vec::new();
        extract_features(&recs, 1)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("pu3_len,pu3_iat,pu3_var\n"));
    }

    #[test]
    fn voip_lengths_are_exact() {
        let recs = synthesize_trace(&[PatternSpec::voip().with_portion(1.0)], 5, 20, 1).unwrap();
        assert!(recs.iter().all(|r| r.length == 210.0));
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = synthesize_trace(&PatternSpec::reference_set(), 10, 10, 42).unwrap();
        let b = synthesize_trace(&PatternSpec::reference_set(), 10, 10, 42).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_trace_to(&mut x, &a).unwrap();
        write_trace_to(&mut y, &b).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn game_interarrival_mean() {
        let spec = PatternSpec::game().with_portion(1.0);
        let recs = synthesize_trace(&[spec], 10_000, 2, 9).unwrap();
        let m = extract_features(&recs, 2).unwrap();
        let n = m.pu_ids().len();
        let mean = (0..n).map(|p| m.features(0, p)[1]).sum::<f64>() / n as f64;
        assert!((mean / spec.mean_interarrival - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn degenerate_portions_rejected() {
        let spec = PatternSpec::voip().with_portion(0.0);
        assert!(synthesize_trace(&[spec], 3, 3, 0).is_err());
    }

    #[test]
    fn zero_variance_round_trip() {
        let spec = PatternSpec::udp().with_portion(1.0);
        let recs = synthesize_trace(&[spec], 200, 10, 5).unwrap();
        let m = extract_features(&recs, 10).unwrap();
        let gaps: Vec<f64> = (0..m.pu_ids().len())
            .flat_map(|p| (0..10).map(move |r| (p, r)))
            .map(|(p, r)| m.features(r, p)[1])
            .collect();
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        // Exponential gaps: standard deviation equals the mean.
        let se = spec.mean_interarrival / n.sqrt();
        assert!((mean - spec.mean_interarrival).abs() < 3.0 * se);
        assert!(m.feature_points().iter().all(|p| p[0] == 1512.0));
    }

    #[test]
    fn standardized_columns() {
        let recs = synthesize_trace(&PatternSpec::reference_set(), 3, 30, 2).unwrap();
        let z = extract_features(&recs, 30).unwrap().standardized();
        for c in 0..z.cols() {
            let mean = (0..z.rows()).map(|r| z.get(r, c)).sum::<f64>() / 30.0;
            assert!(mean.abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn shift_invariant(shift in -1e3f64..1e3, seed in 0u64..1000) {
            let recs = synthesize_trace(&PatternSpec::reference_set(), 3, 6, seed).unwrap();
            let shifted: Vec<_> = recs.iter().map(|r| TraceRecord { timestamp: r.timestamp + shift, ..*r }).collect();
            let a = extract_features(&recs, 6).unwrap();
            let b = extract_features(&shifted, 6).unwrap();
            for r in 0..6 {
                for c in 0..a.cols() {
                    let (x, y) = (a.get(r, c), b.get(r, c));
                    prop_assert!((x - y).abs() <= 1e-9 * (1.0 + shift.abs()), "{} vs {}", x, y);
                }
            }
        }

        #[test]
        fn incremental_variance_matches_direct(lengths in prop::collection::vec(1.0f64..2000.0, 2..40)) {
            let recs: Vec<_> = lengths.iter().enumerate().map(|(i, l)| rec(0, i as f64, *l)).collect();
            let r = lengths.len() - 1;
            let m = extract_features(&recs, r).unwrap();
            for w in 1..=r {
                let xs = &lengths[..w];
                let mean = xs.iter().sum::<f64>() / w as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w as f64;
                let got = m.features(w - 1, 0)[2];
                prop_assert!((got - var).abs() <= 1e-9 * var.max(1.0), "{} vs {}", got, var);
            }
        }
    }
}
