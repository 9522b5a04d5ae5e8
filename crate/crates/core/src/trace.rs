//! Canonical traceroute corpus format and measurement-cycle selection.
//!
//! The corpus is line-delimited JSON, one traceroute per line:
//!
//! ```json
//! {"vp":"nyc1","vp_addr":"198.51.100.9","dst":"203.0.113.7","cycle":4211,
//!  "ts":"2023-07-18T00:00:03Z","hops":[{"ttl":1,"addr":"192.168.0.1"},
//!  {"ttl":2,"addr":null}]}
//! ```
//!
//! `addr: null` is a hop that never replied (the traceroute `*`). Unknown
//! keys are preserved on round-trip and ignored by analysis. An external
//! converter produces this format from whatever the probing tool wrote.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One probe step: the TTL it was sent with and the replying address, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub ttl: u32,
    pub addr: Option<Ipv4Addr>,
}

/// One traceroute from a vantage point to a destination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub vp: String,
    pub vp_addr: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub cycle: u64,
    #[serde(
        serialize_with = "serialize_ts",
        deserialize_with = "deserialize_ts"
    )]
    pub ts: DateTime<Utc>,
    pub hops: Vec<Hop>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

fn serialize_ts<S: serde::Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::Secs, true))
}

fn deserialize_ts<'de, D: serde::Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
    let raw = String::deserialize(d)?;
    DateTime::parse_from_rfc3339(&raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(serde::de::Error::custom)
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json {
        line: u64,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: hop ttl must be >= 1")]
    InvalidTtl { line: u64 },
    #[error("i/o error reading trace corpus: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    Strict,
    /// Malformed lines are counted and skipped. Real corpora contain damage.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub lines: u64,
    pub records: u64,
    pub malformed_lines: u64,
    /// Hops arrived out of TTL order or with duplicate TTLs.
    pub ttl_anomalies: u64,
}

/// Streaming reader over a JSONL corpus. Yields validated records with hops
/// sorted by TTL (first hop wins on duplicate TTLs).
pub struct TraceReader<R: BufRead> {
    input: R,
    mode: IngestMode,
    stats: IngestStats,
    buf: String,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(input: R, mode: IngestMode) -> Self {
        TraceReader {
            input,
            mode,
            stats: IngestStats::default(),
            buf: String::new(),
        }
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    fn parse_line(&mut self, line: &str) -> Result<TraceRecord, TraceError> {
        let line_no = self.stats.lines;
        let mut record: TraceRecord =
            serde_json::from_str(line).map_err(|source| TraceError::Json {
                line: line_no,
                source,
            })?;
        if record.hops.iter().any(|h| h.ttl == 0) {
            return Err(TraceError::InvalidTtl { line: line_no });
        }
        self.stats.ttl_anomalies += normalize_hops(&mut record.hops);
        Ok(record)
    }
}

/// Sorts hops by TTL (stable) and drops all but the first hop of each TTL.
/// Returns the number of anomalies corrected.
pub fn normalize_hops(hops: &mut Vec<Hop>) -> u64 {
    let mut anomalies = 0;
    let sorted = hops.windows(2).all(|w| w[0].ttl < w[1].ttl);
    if sorted {
        return 0;
    }
    hops.sort_by_key(|h| h.ttl);
    let mut seen = None;
    hops.retain(|h| {
        if seen == Some(h.ttl) {
            anomalies += 1;
            false
        } else {
            seen = Some(h.ttl);
            true
        }
    });
    // Count the reordering itself as one anomaly when no duplicates existed.
    anomalies.max(1)
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceRecord, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(TraceError::Io(e))),
            }
            self.stats.lines += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                continue;
            }
            let line = line.to_string();
            match self.parse_line(&line) {
                Ok(record) => {
                    self.stats.records += 1;
                    return Some(Ok(record));
                }
                Err(e) => match self.mode {
                    IngestMode::Strict => return Some(Err(e)),
                    IngestMode::Lenient => {
                        self.stats.malformed_lines += 1;
                        continue;
                    }
                },
            }
        }
    }
}

/// Writes one canonical JSONL line: fixed key order, TTL-sorted hops,
/// RFC 3339 second-precision UTC timestamp, unknown keys appended in sorted
/// order.
pub fn write_canonical_line<W: Write>(out: &mut W, record: &TraceRecord) -> std::io::Result<()> {
    let json = serde_json::to_string(record).expect("trace records serialize");
    out.write_all(json.as_bytes())?;
    out.write_all(b"\n")
}

/// Retains, per vantage point, only the traces from that vantage point's
/// lowest cycle number. Input order is preserved.
pub fn select_lowest_cycle(traces: Vec<TraceRecord>) -> Vec<TraceRecord> {
    let mut min_cycle: BTreeMap<&str, u64> = BTreeMap::new();
    for t in &traces {
        min_cycle
            .entry(t.vp.as_str())
            .and_modify(|m| *m = (*m).min(t.cycle))
            .or_insert(t.cycle);
    }
    let keep: BTreeMap<String, u64> = min_cycle
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    traces
        .into_iter()
        .filter(|t| keep.get(t.vp.as_str()) == Some(&t.cycle))
        .collect()
}

/// One labeled measurement: a cycle-selected trace corpus.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub label: String,
    pub traces: Vec<TraceRecord>,
}

impl Measurement {
    pub fn vp_roster(&self) -> std::collections::BTreeSet<&str> {
        self.traces.iter().map(|t| t.vp.as_str()).collect()
    }

    /// Latest trace timestamp, used as the measurement time for lookback
    /// joins.
    pub fn measurement_time(&self) -> Option<DateTime<Utc>> {
        self.traces.iter().map(|t| t.ts).max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    const SAMPLE: &str = r#"{"vp":"nyc1","vp_addr":"198.51.100.9","dst":"203.0.113.7","cycle":4211,"ts":"2023-07-18T00:00:03Z","hops":[{"ttl":1,"addr":"192.168.0.1"},{"ttl":2,"addr":null}]}"#;

    fn read_all(input: &str, mode: IngestMode) -> (Vec<TraceRecord>, IngestStats) {
        let mut reader = TraceReader::new(BufReader::new(input.as_bytes()), mode);
        let records: Vec<_> = (&mut reader).collect::<Result<_, _>>().unwrap();
        (records, reader.stats())
    }

    #[test]
    fn schema_round_trip() {
        let (records, stats) = read_all(SAMPLE, IngestMode::Strict);
        assert_eq!(records.len(), 1);
        assert_eq!(stats.records, 1);
        let r = &records[0];
        assert_eq!(r.vp, "nyc1");
        assert_eq!(r.hops.len(), 2);
        assert_eq!(r.hops[0].addr, Some("192.168.0.1".parse().unwrap()));
        assert_eq!(r.hops[1].addr, None);

        let mut out = Vec::new();
        write_canonical_line(&mut out, r).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim_end(), SAMPLE);
    }

    #[test]
    fn empty_file_is_empty_sequence() {
        let (records, stats) = read_all("", IngestMode::Strict);
        assert!(records.is_empty());
        assert_eq!(stats.malformed_lines, 0);
    }

    #[test]
    fn out_of_order_hops_are_resorted_and_counted() {
        let line = r#"{"vp":"a","vp_addr":"198.51.100.9","dst":"203.0.113.7","cycle":1,"ts":"2023-07-18T00:00:03Z","hops":[{"ttl":2,"addr":"198.51.100.2"},{"ttl":1,"addr":"198.51.100.1"}]}"#;
        let (records, stats) = read_all(line, IngestMode::Strict);
        assert_eq!(
            records[0].hops.iter().map(|h| h.ttl).collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert_eq!(stats.ttl_anomalies, 1);
    }

    #[test]
    fn duplicate_ttl_keeps_first() {
        let line = r#"{"vp":"a","vp_addr":"198.51.100.9","dst":"203.0.113.7","cycle":1,"ts":"2023-07-18T00:00:03Z","hops":[{"ttl":1,"addr":"198.51.100.1"},{"ttl":1,"addr":"198.51.100.2"}]}"#;
        let (records, stats) = read_all(line, IngestMode::Strict);
        assert_eq!(records[0].hops.len(), 1);
        assert_eq!(records[0].hops[0].addr, Some("198.51.100.1".parse().unwrap()));
        assert!(stats.ttl_anomalies >= 1);
    }

    #[test]
    fn lenient_mode_skips_and_counts_damage() {
        let input = format!("not json at all\n{SAMPLE}\n{{\"vp\":3}}\n");
        let (records, stats) = read_all(&input, IngestMode::Lenient);
        assert_eq!(records.len(), 1);
        assert_eq!(stats.malformed_lines, 2);
        assert_eq!(stats.lines, 3);
    }

    #[test]
    fn strict_mode_reports_line_number() {
        let input = format!("{SAMPLE}\nbroken\n");
        let mut reader = TraceReader::new(BufReader::new(input.as_bytes()), IngestMode::Strict);
        assert!(reader.next().unwrap().is_ok());
        match reader.next().unwrap() {
            Err(TraceError::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected json error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_survive_round_trip() {
        let line = r#"{"vp":"a","vp_addr":"198.51.100.9","dst":"203.0.113.7","cycle":1,"ts":"2023-07-18T00:00:03Z","hops":[],"probe_method":"icmp-echo"}"#;
        let (records, _) = read_all(line, IngestMode::Strict);
        let mut out = Vec::new();
        write_canonical_line(&mut out, &records[0]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains(r#""probe_method":"icmp-echo""#));
        // Re-reading the canonical line reproduces it byte for byte.
        let (again, _) = read_all(text.trim_end(), IngestMode::Strict);
        let mut out2 = Vec::new();
        write_canonical_line(&mut out2, &again[0]).unwrap();
        assert_eq!(text, String::from_utf8(out2).unwrap());
    }

    #[test]
    fn cycle_selection_is_per_vantage_point() {
        let mk = |vp: &str, cycle: u64| TraceRecord {
            vp: vp.to_string(),
            vp_addr: "198.51.100.9".parse().unwrap(),
            dst: "203.0.113.7".parse().unwrap(),
            cycle,
            ts: "2023-07-18T00:00:03Z".parse().unwrap(),
            hops: vec![],
            extra: BTreeMap::new(),
        };
        let traces = vec![mk("a", 8), mk("a", 7), mk("b", 3), mk("a", 7), mk("b", 3)];
        let kept = select_lowest_cycle(traces);
        let got: Vec<_> = kept.iter().map(|t| (t.vp.as_str(), t.cycle)).collect();
        assert_eq!(got, vec![("a", 7), ("b", 3), ("a", 7), ("b", 3)]);

        // Identity when each vp has a single cycle.
        let traces = vec![mk("a", 1), mk("b", 2)];
        assert_eq!(select_lowest_cycle(traces.clone()), traces);
    }
}
