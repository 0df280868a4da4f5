//! Trace-driven cost simulator and eviction-policy library for
//! multi-region, multi-cloud object storage.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`pricing`] — per-region storage rates, directed network rates, and
//!   break-even times.
//! * [`trace`] — trace ingestion, time dilation, multi-region workload
//!   synthesis, and trace characterization.
//! * [`histogram`] — the adaptive-TTL statistics machinery: weighted
//!   inter-arrival histograms, expected-cost curves, and best-TTL search.
//! * [`catalog`] — virtual buckets/objects, versions, and per-region
//!   replica lifecycle.
//! * [`policy`] — the pluggable placement/eviction decision layer.
//! * [`sim`] — the deterministic replay engine and cost ledger, plus the
//!   brute-force and fixed-TTL replay oracles used for validation.
//! * [`synth`] — seeded synthetic workload builders for experiments.
//!
//! All internal times are in seconds; one month is fixed at 30 days.
//! Capacities are decimal gigabytes (1 GB = 10^9 bytes).

pub mod catalog;
pub mod histogram;
pub mod policy;
pub mod pricing;
pub mod sim;
pub mod synth;
pub mod trace;

/// Seconds in one simulated day.
pub const DAY_SECS: f64 = 86_400.0;

/// Seconds in one simulated month (fixed 30-day month).
pub const MONTH_SECS: f64 = 30.0 * DAY_SECS;

/// Bytes in one decimal gigabyte.
pub const BYTES_PER_GB: f64 = 1e9;

/// Converts a byte count to decimal gigabytes.
pub fn gigabytes(bytes: u64) -> f64 {
    bytes as f64 / BYTES_PER_GB
}

/// Converts a duration in seconds to months.
pub fn months(secs: f64) -> f64 {
    secs / MONTH_SECS
}
