//! Flow-record parsing, fixed-window bucketing and feature extraction.
//!
//! Records arrive as one JSON object per line (`ts`, `proto`, `bytes`); live
//! capture is out of scope, a converter can target this format instead.

use std::io::BufRead;

use serde::Deserialize;
use thiserror::Error;

use crate::rulebook::ModuleKind;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: negative bytes ({bytes})")]
    NegativeBytes { line: usize, bytes: i64 },
    #[error("line {line}: non-finite timestamp")]
    BadTimestamp { line: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("link capacity must be positive, got {0}")]
    BadCapacity(f64),
    #[error("window length must be positive, got {0}")]
    BadWindow(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proto {
    Ip,
    Ipx,
    Other,
}

impl Proto {
    fn from_tag(tag: &str) -> Proto {
        // Unknown protocol strings fold into Other.
        match tag {
            "IP" => Proto::Ip,
            "IPX" => Proto::Ipx,
            _ => Proto::Other,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Proto::Ip => "IP",
            Proto::Ipx => "IPX",
            Proto::Other => "OTHER",
        }
    }
}

/// One observed packet/flow summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord {
    pub ts: f64,
    pub proto: Proto,
    pub bytes: u64,
}

impl FlowRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{{\"ts\":{},\"proto\":\"{}\",\"bytes\":{}}}",
            self.ts,
            self.proto.tag(),
            self.bytes
        )
    }
}

#[derive(Deserialize)]
struct RawRecord {
    ts: f64,
    proto: String,
    bytes: i64,
}

/// Parse one record line; `line` is the 1-based line number for diagnostics.
pub fn parse_record_at(text: &str, line: usize) -> Result<FlowRecord, IngestError> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        line,
        msg: e.to_string(),
    })?;
    if !raw.ts.is_finite() {
        return Err(IngestError::BadTimestamp { line });
    }
    if raw.bytes < 0 {
        return Err(IngestError::NegativeBytes { line, bytes: raw.bytes });
    }
    Ok(FlowRecord {
        ts: raw.ts,
        proto: Proto::from_tag(&raw.proto),
        bytes: raw.bytes as u64,
    })
}

pub fn parse_record(text: &str) -> Result<FlowRecord, IngestError> {
    parse_record_at(text, 1)
}

/// Iterator over a line-delimited record stream, attaching line numbers.
pub struct RecordReader<R: BufRead> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, line: 0, buf: String::new() }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<FlowRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line += 1;
                    let text = self.buf.trim();
                    if text.is_empty() {
                        continue;
                    }
                    return Some(parse_record_at(text, self.line));
                }
                Err(e) => return Some(Err(IngestError::Io(e))),
            }
        }
    }
}

/// Aggregated counters for one half-open window [start, start + len).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub window_start: f64,
    pub window_len: f64,
    pub ip_count: u64,
    pub ipx_count: u64,
    pub total_count: u64,
    pub total_bytes: u64,
}

impl Bucket {
    fn empty(window_start: f64, window_len: f64) -> Self {
        Self {
            window_start,
            window_len,
            ip_count: 0,
            ipx_count: 0,
            total_count: 0,
            total_bytes: 0,
        }
    }
}

/// Streaming bucketizer. Empty windows between records are emitted as zero
/// buckets so outages stay visible. Records older than the current open
/// window are rejected and counted (one-window out-of-order tolerance).
pub struct Bucketizer {
    window_len: f64,
    origin: f64,
    current: Option<(i64, Bucket)>,
    pub rejected: u64,
}

impl Bucketizer {
    pub fn new(window_len: f64, origin: f64) -> Result<Self, IngestError> {
        if !(window_len.is_finite() && window_len > 0.0) {
            return Err(IngestError::BadWindow(window_len));
        }
        Ok(Self { window_len, origin, current: None, rejected: 0 })
    }

    fn index_of(&self, ts: f64) -> i64 {
        ((ts - self.origin) / self.window_len).floor() as i64
    }

    fn window_start(&self, index: i64) -> f64 {
        self.origin + index as f64 * self.window_len
    }

    /// Feed one record; returns every bucket closed by its arrival (possibly
    /// several zero buckets when the stream jumped over empty windows).
    pub fn push(&mut self, record: &FlowRecord) -> Vec<Bucket> {
        let idx = self.index_of(record.ts);
        let mut closed = Vec::new();
        match &mut self.current {
            None => {
                self.current = Some((idx, Bucket::empty(self.window_start(idx), self.window_len)));
            }
            Some((cur, _)) if idx < *cur => {
                self.rejected += 1;
                return closed;
            }
            Some((cur, bucket)) if idx > *cur => {
                closed.push(*bucket);
                for gap in (*cur + 1)..idx {
                    closed.push(Bucket::empty(
                        self.origin + gap as f64 * self.window_len,
                        self.window_len,
                    ));
                }
                self.current =
                    Some((idx, Bucket::empty(self.window_start(idx), self.window_len)));
            }
            _ => {}
        }
        let (_, bucket) = self.current.as_mut().expect("current bucket exists");
        bucket.total_count += 1;
        bucket.total_bytes += record.bytes;
        match record.proto {
            Proto::Ip => bucket.ip_count += 1,
            Proto::Ipx => bucket.ipx_count += 1,
            Proto::Other => {}
        }
        closed
    }

    /// Close the stream, emitting the final open bucket if any.
    pub fn finish(self) -> Option<Bucket> {
        self.current.map(|(_, b)| b)
    }
}

/// One crisp feature value for one module at one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSample {
    pub module: ModuleKind,
    pub ts: f64,
    pub value: f64,
}

/// The four per-window features tunneled into the fuzzifier.
pub fn features(bucket: &Bucket, link_capacity_bps: f64) -> Result<[FeatureSample; 4], IngestError> {
    if !(link_capacity_bps.is_finite() && link_capacity_bps > 0.0) {
        return Err(IngestError::BadCapacity(link_capacity_bps));
    }
    let ts = bucket.window_start;
    let bytes_per_sec = bucket.total_bytes as f64 / bucket.window_len;
    let utilization =
        (bucket.total_bytes as f64 * 8.0) / (link_capacity_bps * bucket.window_len) * 100.0;
    Ok([
        FeatureSample { module: ModuleKind::IpCount, ts, value: bucket.ip_count as f64 },
        FeatureSample { module: ModuleKind::IpxCount, ts, value: bucket.ipx_count as f64 },
        FeatureSample { module: ModuleKind::Utilization, ts, value: utilization },
        FeatureSample { module: ModuleKind::BytesPerSec, ts, value: bytes_per_sec },
    ])
}

/// Hours in [0, 24) for an epoch timestamp and a fixed UTC offset.
pub fn time_of_day(ts: f64, utc_offset: f64) -> f64 {
    (ts / 3600.0 + utc_offset).rem_euclid(24.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_basic_fields() {
        let r = parse_record(r#"{"ts":100.0,"proto":"IP","bytes":1500}"#).unwrap();
        assert_eq!(r, FlowRecord { ts: 100.0, proto: Proto::Ip, bytes: 1500 });
    }

    #[test]
    fn unknown_proto_is_other() {
        let r = parse_record(r#"{"ts":100.0,"proto":"ARP","bytes":60}"#).unwrap();
        assert_eq!(r.proto, Proto::Other);
    }

    #[test]
    fn negative_bytes_rejected() {
        let e = parse_record_at(r#"{"ts":100.0,"proto":"IP","bytes":-5}"#, 7).unwrap_err();
        assert!(matches!(e, IngestError::NegativeBytes { line: 7, bytes: -5 }));
    }

    #[test]
    fn malformed_line_carries_number() {
        let e = parse_record_at("not json", 3).unwrap_err();
        assert!(e.to_string().starts_with("line 3:"));
    }

    fn rec(ts: f64, proto: Proto, bytes: u64) -> FlowRecord {
        FlowRecord { ts, proto, bytes }
    }

    #[test]
    fn single_window_aggregation() {
        let mut b = Bucketizer::new(60.0, 0.0).unwrap();
        for (ts, bytes) in [(0.0, 100), (30.0, 200), (59.0, 300)] {
            assert!(b.push(&rec(ts, Proto::Ip, bytes)).is_empty());
        }
        let bucket = b.finish().unwrap();
        assert_eq!(bucket.total_bytes, 600);
        assert_eq!(bucket.total_count, 3);
        assert_eq!(bucket.ip_count, 3);
    }

    #[test]
    fn gap_windows_emitted_as_zero() {
        let mut b = Bucketizer::new(60.0, 0.0).unwrap();
        b.push(&rec(10.0, Proto::Ip, 1));
        let closed = b.push(&rec(130.0, Proto::Ip, 1));
        assert_eq!(closed.len(), 2);
        assert_eq!(closed[1].total_count, 0);
        assert_eq!(closed[1].window_start, 60.0);
        assert!(b.finish().is_some());
    }

    #[test]
    fn boundary_is_half_open() {
        let mut b = Bucketizer::new(60.0, 0.0).unwrap();
        b.push(&rec(0.0, Proto::Ip, 1));
        let closed = b.push(&rec(60.0, Proto::Ip, 1));
        assert_eq!(closed.len(), 1);
        let last = b.finish().unwrap();
        assert_eq!(last.window_start, 60.0);
    }

    #[test]
    fn old_records_rejected_and_counted() {
        let mut b = Bucketizer::new(60.0, 0.0).unwrap();
        b.push(&rec(120.0, Proto::Ip, 1));
        b.push(&rec(50.0, Proto::Ip, 1));
        assert_eq!(b.rejected, 1);
        // Same-window records after a newer one are still accepted.
        b.push(&rec(121.0, Proto::Ip, 1));
        assert_eq!(b.finish().unwrap().total_count, 2);
    }

    #[test]
    fn feature_values() {
        let bucket = Bucket {
            window_start: 0.0,
            window_len: 60.0,
            ip_count: 2,
            ipx_count: 1,
            total_count: 4,
            total_bytes: 600,
        };
        let f = features(&bucket, 1e7).unwrap();
        assert_eq!(f[0].value, 2.0);
        assert_eq!(f[1].value, 1.0);
        assert!((f[3].value - 10.0).abs() < 1e-12);
        // utilization: 600 bytes over 60 s on 10 Mbps
        let big = Bucket { total_bytes: 600_000, ..bucket };
        let f = features(&big, 1e7).unwrap();
        assert!((f[2].value - 0.8).abs() < 1e-12);
    }

    #[test]
    fn empty_bucket_features_are_zero() {
        let f = features(&Bucket::empty(0.0, 60.0), 1e7).unwrap();
        assert!(f.iter().all(|s| s.value == 0.0));
    }

    #[test]
    fn bad_capacity_is_config_error() {
        let bucket = Bucket::empty(0.0, 60.0);
        assert!(features(&bucket, 0.0).is_err());
    }

    #[test]
    fn time_of_day_wraps() {
        assert_eq!(time_of_day(0.0, 0.0), 0.0);
        assert_eq!(time_of_day(3600.0 * 10.0, 0.0), 10.0);
        assert_eq!(time_of_day(3600.0 * 23.0, 8.0), 7.0);
    }

    #[test]
    fn reader_skips_blank_lines() {
        let data = "{\"ts\":1.0,\"proto\":\"IP\",\"bytes\":10}\n\n{\"ts\":2.0,\"proto\":\"IPX\",\"bytes\":20}\n";
        let recs: Vec<_> = RecordReader::new(data.as_bytes()).collect::<Result<_, _>>().unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].proto, Proto::Ipx);
    }
}
