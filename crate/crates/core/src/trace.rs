//! Object-store trace ingestion, time dilation, multi-region workload
//! synthesis, and trace characterization.
//!
//! The canonical trace format is CSV with a header row:
//! `t_ms,op,key,size_bytes,region`. The region column may be empty for
//! single-region sources; synthesis fills it in.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pricing::Region;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {msg}")]
    BadRow { row: usize, msg: String },
    #[error("dilation must be >= 1, got {0}")]
    BadDilation(f64),
    #[error("synthesis requires at least 2 distinct regions")]
    TooFewRegions,
    #[error("duplicate region {0:?} in region list")]
    DuplicateRegion(String),
    #[error("scheme references region {0:?} not in the region list")]
    UnknownSchemeRegion(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Request verb. HEAD is carried through ingestion but is metadata-only
/// in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Get,
    Put,
    Delete,
    Head,
}

impl Op {
    pub fn as_str(&self) -> &'static str {
        match self {
            Op::Get => "GET",
            Op::Put => "PUT",
            Op::Delete => "DELETE",
            Op::Head => "HEAD",
        }
    }

    fn parse(s: &str) -> Option<Op> {
        match s.to_ascii_uppercase().as_str() {
            "GET" => Some(Op::Get),
            "PUT" => Some(Op::Put),
            "DELETE" => Some(Op::Delete),
            "HEAD" => Some(Op::Head),
            _ => None,
        }
    }
}

/// One timestamped request.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    /// Seconds since trace start.
    pub t: f64,
    pub op: Op,
    pub key: String,
    pub size: u64,
    pub region: Region,
}

/// A time-ordered request stream.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub requests: Vec<Request>,
    /// End of the observation window; at least the last request time.
    pub horizon: f64,
}

impl Trace {
    pub fn new(mut requests: Vec<Request>, horizon: f64) -> Self {
        requests.sort_by(|a, b| a.t.total_cmp(&b.t));
        let last = requests.last().map(|r| r.t).unwrap_or(0.0);
        Trace {
            requests,
            horizon: horizon.max(last),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    /// Distinct regions appearing in the trace, sorted.
    pub fn regions(&self) -> Vec<Region> {
        let mut set: Vec<Region> = Vec::new();
        for r in &self.requests {
            if !set.contains(&r.region) {
                set.push(r.region.clone());
            }
        }
        set.sort();
        set
    }
}

/// What `import_trace` had to fix up.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ImportReport {
    pub rows: usize,
    /// Keys that received a synthetic PUT at t=0 because a GET or HEAD
    /// arrived before any PUT.
    pub repairs: usize,
    /// True if rows were not monotone in time and had to be stably sorted.
    pub reordered: bool,
}

/// Reads the canonical CSV format into a well-formed trace.
///
/// GETs whose key lacks a prior PUT are repaired by inserting a synthetic
/// PUT at t=0 with the GET's size; non-monotone rows are stably sorted
/// with a warning.
pub fn import_trace(source: impl Read) -> Result<(Trace, ImportReport), TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);

    let mut requests: Vec<Request> = Vec::new();
    let mut report = ImportReport::default();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header
        let record = record?;
        if record.len() < 4 {
            return Err(TraceError::BadRow {
                row,
                msg: format!("expected at least 4 fields, got {}", record.len()),
            });
        }
        let t_ms: f64 = record[0].trim().parse().map_err(|_| TraceError::BadRow {
            row,
            msg: format!("bad timestamp {:?}", &record[0]),
        })?;
        if !t_ms.is_finite() || t_ms < 0.0 {
            return Err(TraceError::BadRow {
                row,
                msg: format!("timestamp out of range: {t_ms}"),
            });
        }
        let op = Op::parse(record[1].trim()).ok_or_else(|| TraceError::BadRow {
            row,
            msg: format!("unknown op {:?}", &record[1]),
        })?;
        let key = record[2].trim().to_string();
        if key.is_empty() {
            return Err(TraceError::BadRow {
                row,
                msg: "empty object key".into(),
            });
        }
        let size: u64 = record[3].trim().parse().map_err(|_| TraceError::BadRow {
            row,
            msg: format!("bad size {:?}", &record[3]),
        })?;
        let region = Region::new(record.get(4).map(str::trim).unwrap_or(""));
        requests.push(Request {
            t: t_ms / 1000.0,
            op,
            key,
            size,
            region,
        });
        report.rows += 1;
    }

    let monotone = requests.windows(2).all(|w| w[0].t <= w[1].t);
    if !monotone {
        log::warn!("trace rows are not monotone in time; stable-sorting by timestamp");
        requests.sort_by(|a, b| a.t.total_cmp(&b.t));
        report.reordered = true;
    }

    // Repair orphan reads: first GET/HEAD of a never-PUT key gets a
    // synthetic PUT at t=0 with the read's size and region.
    let mut seen_put: BTreeMap<&str, ()> = BTreeMap::new();
    let mut synthetic: Vec<Request> = Vec::new();
    for req in &requests {
        match req.op {
            Op::Put => {
                seen_put.insert(&req.key, ());
            }
            Op::Get | Op::Head => {
                if !seen_put.contains_key(req.key.as_str()) {
                    seen_put.insert(&req.key, ());
                    synthetic.push(Request {
                        t: 0.0,
                        op: Op::Put,
                        key: req.key.clone(),
                        size: req.size,
                        region: req.region.clone(),
                    });
                }
            }
            Op::Delete => {}
        }
    }
    report.repairs = synthetic.len();
    if !synthetic.is_empty() {
        synthetic.extend(requests);
        requests = synthetic;
    }

    let horizon = requests.last().map(|r| r.t).unwrap_or(0.0);
    Ok((Trace { requests, horizon }, report))
}

/// Writes a trace in the canonical CSV format.
pub fn write_trace_csv(trace: &Trace, sink: impl Write) -> Result<(), TraceError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["t_ms", "op", "key", "size_bytes", "region"])?;
    for req in &trace.requests {
        writer.write_record([
            format_ms(req.t),
            req.op.as_str().to_string(),
            req.key.clone(),
            req.size.to_string(),
            req.region.as_str().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn format_ms(t_secs: f64) -> String {
    let ms = t_secs * 1000.0;
    if ms == ms.trunc() && ms.abs() < 9e15 {
        format!("{}", ms as i64)
    } else {
        format!("{ms}")
    }
}

/// Stretches the time axis by `dilation`, leaving keys, sizes, the op mix,
/// and per-object access counts untouched.
pub fn expand_trace(trace: &Trace, dilation: f64) -> Result<Trace, TraceError> {
    if !(dilation >= 1.0) || !dilation.is_finite() {
        return Err(TraceError::BadDilation(dilation));
    }
    let requests = trace
        .requests
        .iter()
        .map(|r| Request {
            t: r.t * dilation,
            ..r.clone()
        })
        .collect();
    Ok(Trace {
        requests,
        horizon: trace.horizon * dilation,
    })
}

/// Region-assignment scheme for multi-region workload synthesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scheme {
    /// Writes go to `base`, reads to `cache`.
    BaseCache { base: Region, cache: Region },
    /// Every request is routed to a uniformly random region.
    TypeA,
    /// Each object gets a random PUT region and a distinct random GET region.
    TypeB,
    /// Each object gets a random PUT region; all GETs go to one region.
    TypeC { get_region: Region },
    /// Each object gets a random PUT region; each GET picks uniformly
    /// among the other regions.
    TypeD,
}

/// Reassigns request regions per `scheme`. Timestamps, ops, keys, and
/// sizes pass through unchanged; `seed` fixes all randomness.
///
/// Writes (PUT/DELETE) follow the object's write region and reads
/// (GET/HEAD) its read region, where the scheme distinguishes them.
pub fn synthesize(
    trace: &Trace,
    scheme: &Scheme,
    regions: &[Region],
    seed: u64,
) -> Result<Trace, TraceError> {
    let mut distinct = regions.to_vec();
    distinct.sort();
    for pair in distinct.windows(2) {
        if pair[0] == pair[1] {
            return Err(TraceError::DuplicateRegion(pair[0].to_string()));
        }
    }
    if regions.len() < 2 {
        return Err(TraceError::TooFewRegions);
    }
    match scheme {
        Scheme::BaseCache { base, cache } => {
            for r in [base, cache] {
                if !regions.contains(r) {
                    return Err(TraceError::UnknownSchemeRegion(r.to_string()));
                }
            }
            if base == cache {
                return Err(TraceError::DuplicateRegion(base.to_string()));
            }
        }
        Scheme::TypeC { get_region } => {
            if !regions.contains(get_region) {
                return Err(TraceError::UnknownSchemeRegion(get_region.to_string()));
            }
        }
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Per-object region assignments, in first-appearance order so the
    // result depends only on the trace and the seed.
    let mut object_regions: BTreeMap<&str, (Region, Region)> = BTreeMap::new();
    for req in &trace.requests {
        if object_regions.contains_key(req.key.as_str()) {
            continue;
        }
        let assignment = match scheme {
            Scheme::BaseCache { base, cache } => (base.clone(), cache.clone()),
            Scheme::TypeA => (Region::new(""), Region::new("")), // unused
            Scheme::TypeB => {
                let put = regions[rng.gen_range(0..regions.len())].clone();
                let mut get = regions[rng.gen_range(0..regions.len())].clone();
                while get == put {
                    get = regions[rng.gen_range(0..regions.len())].clone();
                }
                (put, get)
            }
            Scheme::TypeC { get_region } => {
                let put = regions[rng.gen_range(0..regions.len())].clone();
                (put, get_region.clone())
            }
            Scheme::TypeD => {
                let put = regions[rng.gen_range(0..regions.len())].clone();
                (put, Region::new("")) // GET region drawn per request
            }
        };
        object_regions.insert(&req.key, assignment);
    }

    let mut requests = Vec::with_capacity(trace.requests.len());
    for req in &trace.requests {
        let (put_region, get_region) = &object_regions[req.key.as_str()];
        let region = match scheme {
            Scheme::TypeA => regions[rng.gen_range(0..regions.len())].clone(),
            Scheme::TypeD => match req.op {
                Op::Put | Op::Delete => put_region.clone(),
                Op::Get | Op::Head => {
                    let mut r = regions[rng.gen_range(0..regions.len())].clone();
                    while r == *put_region {
                        r = regions[rng.gen_range(0..regions.len())].clone();
                    }
                    r
                }
            },
            _ => match req.op {
                Op::Put | Op::Delete => put_region.clone(),
                Op::Get | Op::Head => get_region.clone(),
            },
        };
        requests.push(Request {
            region,
            ..req.clone()
        });
    }

    Ok(Trace {
        requests,
        horizon: trace.horizon,
    })
}

/// Size classes by first-PUT size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SizeClasses {
    /// < 1 KB
    pub tiny: f64,
    /// 1 KB to 1 MB
    pub small: f64,
    /// 1 MB to 1 GB
    pub medium: f64,
    /// > 1 GB
    pub large: f64,
}

/// Read-frequency classes by per-object GET count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FrequencyClasses {
    /// exactly 1 GET
    pub one_hit: f64,
    /// 2..=10 GETs
    pub cold: f64,
    /// 11..=100 GETs
    pub warm: f64,
    /// 101..=1000 GETs
    pub hot: f64,
    /// > 1000 GETs
    pub super_hot: f64,
}

/// Summary of inter-GET gaps in seconds.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RecencyStats {
    pub gaps: usize,
    pub mean_s: f64,
    pub p50_s: f64,
    pub p90_s: f64,
    pub p99_s: f64,
    pub max_s: f64,
}

/// Trace characterization across the five families used to pick
/// representative workloads.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStats {
    pub objects: usize,
    pub gets: usize,
    pub puts: usize,
    pub deletes: usize,
    pub heads: usize,
    pub get_bytes: u64,
    pub put_bytes: u64,
    pub size_classes: SizeClasses,
    pub frequency_classes: FrequencyClasses,
    pub recency: RecencyStats,
    /// Fraction of GETs in each of `BURST_BUCKETS` equal slices of the
    /// observation window.
    pub burstiness: Vec<f64>,
}

pub const BURST_BUCKETS: usize = 10;

const KB: u64 = 1_000;
const MB: u64 = 1_000_000;
const GB: u64 = 1_000_000_000;

/// Computes all five statistic families. Objects are classified by the
/// size of their first PUT.
pub fn analyze(trace: &Trace) -> TraceStats {
    struct ObjectAcc {
        first_put_size: Option<u64>,
        gets: u64,
        last_get: Option<f64>,
    }

    let mut objects: BTreeMap<&str, ObjectAcc> = BTreeMap::new();
    let mut gets = 0usize;
    let mut puts = 0usize;
    let mut deletes = 0usize;
    let mut heads = 0usize;
    let mut get_bytes = 0u64;
    let mut put_bytes = 0u64;
    let mut gaps: Vec<f64> = Vec::new();
    let mut burst = vec![0usize; BURST_BUCKETS];

    for req in &trace.requests {
        let acc = objects.entry(&req.key).or_insert(ObjectAcc {
            first_put_size: None,
            gets: 0,
            last_get: None,
        });
        match req.op {
            Op::Put => {
                puts += 1;
                put_bytes += req.size;
                if acc.first_put_size.is_none() {
                    acc.first_put_size = Some(req.size);
                }
            }
            Op::Get => {
                gets += 1;
                get_bytes += req.size;
                acc.gets += 1;
                if let Some(prev) = acc.last_get {
                    gaps.push(req.t - prev);
                }
                acc.last_get = Some(req.t);
                if trace.horizon > 0.0 {
                    let bucket = ((req.t / trace.horizon) * BURST_BUCKETS as f64) as usize;
                    burst[bucket.min(BURST_BUCKETS - 1)] += 1;
                }
            }
            Op::Delete => deletes += 1,
            Op::Head => heads += 1,
        }
    }

    let mut size_classes = SizeClasses::default();
    let mut sized = 0usize;
    let mut frequency_classes = FrequencyClasses::default();
    let mut read = 0usize;
    for acc in objects.values() {
        if let Some(size) = acc.first_put_size {
            sized += 1;
            if size < KB {
                size_classes.tiny += 1.0;
            } else if size < MB {
                size_classes.small += 1.0;
            } else if size <= GB {
                size_classes.medium += 1.0;
            } else {
                size_classes.large += 1.0;
            }
        }
        if acc.gets > 0 {
            read += 1;
            match acc.gets {
                1 => frequency_classes.one_hit += 1.0,
                2..=10 => frequency_classes.cold += 1.0,
                11..=100 => frequency_classes.warm += 1.0,
                101..=1000 => frequency_classes.hot += 1.0,
                _ => frequency_classes.super_hot += 1.0,
            }
        }
    }
    if sized > 0 {
        let n = sized as f64;
        size_classes.tiny /= n;
        size_classes.small /= n;
        size_classes.medium /= n;
        size_classes.large /= n;
    }
    if read > 0 {
        let n = read as f64;
        frequency_classes.one_hit /= n;
        frequency_classes.cold /= n;
        frequency_classes.warm /= n;
        frequency_classes.hot /= n;
        frequency_classes.super_hot /= n;
    }

    gaps.sort_by(f64::total_cmp);
    let pct = |p: f64| -> f64 {
        if gaps.is_empty() {
            return 0.0;
        }
        let idx = ((gaps.len() as f64 - 1.0) * p).round() as usize;
        gaps[idx]
    };
    let recency = RecencyStats {
        gaps: gaps.len(),
        mean_s: if gaps.is_empty() {
            0.0
        } else {
            gaps.iter().sum::<f64>() / gaps.len() as f64
        },
        p50_s: pct(0.5),
        p90_s: pct(0.9),
        p99_s: pct(0.99),
        max_s: gaps.last().copied().unwrap_or(0.0),
    };

    let burstiness = if gets > 0 {
        burst.iter().map(|&c| c as f64 / gets as f64).collect()
    } else {
        vec![0.0; BURST_BUCKETS]
    };

    TraceStats {
        objects: objects.len(),
        gets,
        puts,
        deletes,
        heads,
        get_bytes,
        put_bytes,
        size_classes,
        frequency_classes,
        recency,
        burstiness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req(t: f64, op: Op, key: &str, size: u64, region: &str) -> Request {
        Request {
            t,
            op,
            key: key.to_string(),
            size,
            region: Region::new(region),
        }
    }

    #[test]
    fn imports_three_row_csv() {
        let csv = "t_ms,op,key,size_bytes,region\n0,PUT,k,100,\n5000,GET,k,100,\n9000,GET,k,100,\n";
        let (trace, report) = import_trace(csv.as_bytes()).unwrap();
        assert_eq!(trace.requests.len(), 3);
        assert_eq!(report.repairs, 0);
        assert!(!report.reordered);
        assert_eq!(trace.requests[1].t, 5.0);
        assert_eq!(trace.horizon, 9.0);
    }

    #[test]
    fn repairs_orphan_get() {
        let csv = "t_ms,op,key,size_bytes,region\n5000,GET,k,77,\n9000,GET,k,77,\n";
        let (trace, report) = import_trace(csv.as_bytes()).unwrap();
        assert_eq!(report.repairs, 1);
        assert_eq!(trace.requests.len(), 3);
        assert_eq!(trace.requests[0].op, Op::Put);
        assert_eq!(trace.requests[0].t, 0.0);
        assert_eq!(trace.requests[0].size, 77);
    }

    #[test]
    fn empty_file_gives_empty_trace() {
        let csv = "t_ms,op,key,size_bytes,region\n";
        let (trace, report) = import_trace(csv.as_bytes()).unwrap();
        assert!(trace.is_empty());
        assert_eq!(trace.horizon, 0.0);
        assert_eq!(report.rows, 0);
    }

    #[test]
    fn sorts_non_monotone_rows() {
        let csv = "t_ms,op,key,size_bytes,region\n0,PUT,k,1,\n9000,GET,k,1,\n5000,GET,k,1,\n";
        let (trace, report) = import_trace(csv.as_bytes()).unwrap();
        assert!(report.reordered);
        assert!(trace.requests.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn csv_round_trip() {
        let trace = Trace::new(
            vec![
                req(0.0, Op::Put, "a", 100, "A"),
                req(1.5, Op::Get, "a", 100, "B"),
            ],
            10.0,
        );
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let (back, _) = import_trace(buf.as_slice()).unwrap();
        assert_eq!(back.requests, trace.requests);
    }

    #[test]
    fn dilation_one_is_identity() {
        let trace = Trace::new(vec![req(3.0, Op::Put, "a", 10, "")], 5.0);
        let out = expand_trace(&trace, 1.0).unwrap();
        assert_eq!(out.requests, trace.requests);
        assert_eq!(out.horizon, trace.horizon);
    }

    #[test]
    fn dilation_scales_gaps() {
        let day = 86_400.0;
        let trace = Trace::new(
            vec![
                req(0.0, Op::Put, "a", 10, ""),
                req(day, Op::Get, "a", 10, ""),
                req(2.0 * day, Op::Get, "a", 10, ""),
            ],
            2.0 * day,
        );
        let out = expand_trace(&trace, 30.0).unwrap();
        assert_eq!(out.requests[2].t - out.requests[1].t, 30.0 * day);
        let before = analyze(&trace);
        let after = analyze(&out);
        assert_eq!(before.gets, after.gets);
        assert_eq!(before.puts, after.puts);
    }

    #[test]
    fn dilation_below_one_rejected() {
        let trace = Trace::default();
        assert!(matches!(
            expand_trace(&trace, 0.5),
            Err(TraceError::BadDilation(_))
        ));
    }

    fn regions(names: &[&str]) -> Vec<Region> {
        names.iter().map(|n| Region::new(*n)).collect()
    }

    fn sample_trace() -> Trace {
        Trace::new(
            vec![
                req(0.0, Op::Put, "a", 10, ""),
                req(1.0, Op::Put, "b", 20, ""),
                req(2.0, Op::Get, "a", 10, ""),
                req(3.0, Op::Get, "b", 20, ""),
                req(4.0, Op::Get, "a", 10, ""),
            ],
            10.0,
        )
    }

    #[test]
    fn base_cache_routes_puts_and_gets() {
        let trace = sample_trace();
        let out = synthesize(
            &trace,
            &Scheme::BaseCache {
                base: "A".into(),
                cache: "B".into(),
            },
            &regions(&["A", "B"]),
            1,
        )
        .unwrap();
        for r in &out.requests {
            match r.op {
                Op::Put | Op::Delete => assert_eq!(r.region.as_str(), "A"),
                Op::Get | Op::Head => assert_eq!(r.region.as_str(), "B"),
            }
        }
    }

    #[test]
    fn type_c_sends_all_gets_to_one_region() {
        let trace = sample_trace();
        let out = synthesize(
            &trace,
            &Scheme::TypeC {
                get_region: "A".into(),
            },
            &regions(&["A", "B", "C"]),
            2,
        )
        .unwrap();
        for r in &out.requests {
            if r.op == Op::Get {
                assert_eq!(r.region.as_str(), "A");
            }
        }
    }

    #[test]
    fn type_b_separates_put_and_get_regions() {
        let trace = sample_trace();
        let out = synthesize(&trace, &Scheme::TypeB, &regions(&["A", "B", "C"]), 3).unwrap();
        let mut put_region: BTreeMap<&str, &Region> = BTreeMap::new();
        for r in &out.requests {
            if r.op == Op::Put {
                put_region.insert(&r.key, &r.region);
            }
        }
        for r in &out.requests {
            if r.op == Op::Get {
                assert_ne!(Some(&&r.region), put_region.get(r.key.as_str()));
            }
        }
    }

    #[test]
    fn type_d_spreads_gets_away_from_put_region() {
        let trace = sample_trace();
        let out = synthesize(&trace, &Scheme::TypeD, &regions(&["A", "B", "C"]), 4).unwrap();
        let mut put_region: BTreeMap<&str, Region> = BTreeMap::new();
        for r in &out.requests {
            if r.op == Op::Put {
                put_region.insert(&r.key, r.region.clone());
            }
        }
        for r in &out.requests {
            if r.op == Op::Get {
                assert_ne!(r.region, put_region[r.key.as_str()]);
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let trace = sample_trace();
        let rs = regions(&["A", "B", "C"]);
        let a = synthesize(&trace, &Scheme::TypeA, &rs, 42).unwrap();
        let b = synthesize(&trace, &Scheme::TypeA, &rs, 42).unwrap();
        assert_eq!(a.requests, b.requests);
        let c = synthesize(&trace, &Scheme::TypeA, &rs, 43).unwrap();
        assert_ne!(
            a.requests.iter().map(|r| &r.region).collect::<Vec<_>>(),
            c.requests.iter().map(|r| &r.region).collect::<Vec<_>>()
        );
    }

    #[test]
    fn unknown_scheme_region_rejected() {
        let trace = sample_trace();
        let err = synthesize(
            &trace,
            &Scheme::TypeC {
                get_region: "Z".into(),
            },
            &regions(&["A", "B"]),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, TraceError::UnknownSchemeRegion(_)));
    }

    #[test]
    fn analyze_one_hit_fraction() {
        let trace = Trace::new(
            vec![req(0.0, Op::Put, "a", 10, ""), req(1.0, Op::Get, "a", 10, "")],
            2.0,
        );
        let stats = analyze(&trace);
        assert_eq!(stats.frequency_classes.one_hit, 1.0);
    }

    #[test]
    fn analyze_size_boundaries() {
        let trace = Trace::new(
            vec![
                req(0.0, Op::Put, "a", 500, ""),
                req(0.0, Op::Put, "b", 5_000_000, ""),
            ],
            1.0,
        );
        let stats = analyze(&trace);
        assert_eq!(stats.size_classes.tiny, 0.5);
        assert_eq!(stats.size_classes.medium, 0.5);
    }

    #[test]
    fn analyze_frequency_classes() {
        let mut requests = Vec::new();
        for (key, count) in [("a", 1), ("b", 5), ("c", 50), ("d", 500)] {
            requests.push(req(0.0, Op::Put, key, 10, ""));
            for i in 0..count {
                requests.push(req(1.0 + i as f64, Op::Get, key, 10, ""));
            }
        }
        let stats = analyze(&Trace::new(requests, 1000.0));
        assert_eq!(stats.frequency_classes.one_hit, 0.25);
        assert_eq!(stats.frequency_classes.cold, 0.25);
        assert_eq!(stats.frequency_classes.warm, 0.25);
        assert_eq!(stats.frequency_classes.hot, 0.25);
        assert_eq!(stats.frequency_classes.super_hot, 0.0);
    }

    proptest! {
        // Synthesis and dilation leave the (op, key, size) projection alone.
        #[test]
        fn synthesis_preserves_projection(seed in 0u64..1000, dilation in 1.0f64..50.0) {
            let trace = sample_trace();
            let rs = regions(&["A", "B", "C"]);
            let synth = synthesize(&trace, &Scheme::TypeA, &rs, seed).unwrap();
            let expanded = expand_trace(&synth, dilation).unwrap();
            let proj = |t: &Trace| t.requests.iter()
                .map(|r| (r.op, r.key.clone(), r.size))
                .collect::<Vec<_>>();
            prop_assert_eq!(proj(&trace), proj(&synth));
            prop_assert_eq!(proj(&trace), proj(&expanded));
        }

        // Read-frequency classes are dilation-invariant.
        #[test]
        fn frequency_classes_survive_dilation(dilation in 1.0f64..100.0) {
            let trace = sample_trace();
            let before = analyze(&trace).frequency_classes;
            let after = analyze(&expand_trace(&trace, dilation).unwrap()).frequency_classes;
            prop_assert_eq!(before, after);
        }
    }
}
