//! Deterministic trace replay: drives the catalog and a policy over a
//! request stream, accounts every dollar, and reports costs and hit
//! ratios. The submodule [`oracle`] hosts the brute-force optimum, the
//! fixed-TTL replay, and the adversarial workload construction used to
//! validate the policies.

pub mod oracle;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::catalog::{Catalog, CatalogError, ClosedInterval, Consistency, Mode, ReadPlan};
use crate::policy::{PolicyEngine, PolicyError, PolicyKind, ReadContext, ReadDecision};
use crate::pricing::{PricingTable, Region};
use crate::trace::{Op, Trace};
use crate::{gigabytes, months, DAY_SECS};

/// Bucket name used for trace-driven runs; traces carry keys only.
pub const DEFAULT_BUCKET: &str = "default";

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("request at t={t} uses region {region:?} not present in the pricing table")]
    UnknownRegion { region: String, t: f64 },
    #[error("request at t={t} has no region; synthesize the trace first")]
    MissingRegion { t: f64 },
    #[error("{0}")]
    Unsupported(String),
}

/// How expired replicas are charged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvictionAccounting {
    /// Evictions are backdated to `last_access + ttl`.
    Exact,
    /// A scan runs every `interval` seconds; replicas are charged (and
    /// keep serving reads) until the tick that removes them.
    Periodic { interval: f64 },
}

impl EvictionAccounting {
    pub fn as_str(&self) -> String {
        match self {
            EvictionAccounting::Exact => "exact".to_string(),
            EvictionAccounting::Periodic { interval } => format!("periodic:{interval}s"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mode: Mode,
    pub consistency: Consistency,
    pub eviction: EvictionAccounting,
    /// How often the adaptive policy refreshes edge TTLs.
    pub recompute_interval: f64,
    /// Charge storage for FB base replicas (off by default: that cost is
    /// identical across policies).
    pub include_base_storage: bool,
    pub charge_ops: bool,
    /// Versioned reads when true; last-writer-wins otherwise.
    pub versioning: bool,
    /// Whether HEAD requests reset replica TTLs.
    pub head_resets_ttl: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: Mode::Fb,
            consistency: Consistency::ReadAfterWrite,
            eviction: EvictionAccounting::Exact,
            recompute_interval: DAY_SECS,
            include_base_storage: false,
            charge_ops: false,
            versioning: true,
            head_resets_ttl: false,
            seed: 0,
        }
    }
}

/// Storage cost of `bytes` held for `duration_s` at `rate` USD/GB-month.
pub fn storage_charge(bytes: u64, rate: f64, duration_s: f64) -> f64 {
    gigabytes(bytes) * rate * months(duration_s)
}

/// Network cost of moving `bytes` at `rate` USD/GB.
pub fn transfer_charge(bytes: u64, rate: f64) -> f64 {
    gigabytes(bytes) * rate
}

/// Sums charges in a canonical order so structurally equal charge sets
/// produce bit-identical totals regardless of event order.
pub fn canonical_sum(charges: &mut Vec<f64>) -> f64 {
    charges.sort_by(f64::total_cmp);
    charges.iter().sum()
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq)]
pub struct RegionCosts {
    pub storage_usd: f64,
    pub network_usd: f64,
    pub ops_usd: f64,
}

/// Accumulated charges, split by category and by region. Network charges
/// are attributed to the egress (source) region.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CostLedger {
    pub storage_usd: f64,
    pub network_usd: f64,
    pub ops_usd: f64,
    pub per_region: BTreeMap<String, RegionCosts>,
}

impl CostLedger {
    pub fn total_usd(&self) -> f64 {
        self.storage_usd + self.network_usd + self.ops_usd
    }

    fn region(&mut self, region: &Region) -> &mut RegionCosts {
        self.per_region.entry(region.to_string()).or_default()
    }

    fn add_storage(&mut self, region: &Region, usd: f64) {
        self.storage_usd += usd;
        self.region(region).storage_usd += usd;
    }

    fn add_network(&mut self, src: &Region, usd: f64) {
        self.network_usd += usd;
        self.region(src).network_usd += usd;
    }

    fn add_ops(&mut self, region: &Region, usd: f64) {
        self.ops_usd += usd;
        self.region(region).ops_usd += usd;
    }
}

/// Raw charge events retained for the second-pass audit.
#[derive(Debug, Default)]
struct AuditLog {
    storage: Vec<f64>,
    network: Vec<f64>,
    ops: Vec<f64>,
}

/// Independent re-accounting of the run, produced by replaying the charge
/// log in canonical order after the simulation finished.
#[derive(Debug, Clone, Serialize)]
pub struct AuditSummary {
    pub storage_usd: f64,
    pub network_usd: f64,
    pub ops_usd: f64,
    pub total_usd: f64,
    /// Canonically ordered total; bit-stable across event orderings.
    pub canonical_total_usd: f64,
    /// Largest relative disagreement with the ledger.
    pub max_rel_delta: f64,
}

impl AuditLog {
    fn summarize(mut self, ledger: &CostLedger) -> AuditSummary {
        let storage = canonical_sum(&mut self.storage);
        let network = canonical_sum(&mut self.network);
        let ops = canonical_sum(&mut self.ops);
        let total = storage + network + ops;
        let mut all: Vec<f64> = Vec::with_capacity(
            self.storage.len() + self.network.len() + self.ops.len(),
        );
        all.extend_from_slice(&self.storage);
        all.extend_from_slice(&self.network);
        all.extend_from_slice(&self.ops);
        let canonical_total = canonical_sum(&mut all);
        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs()).max(1e-12);
            (a - b).abs() / scale
        };
        AuditSummary {
            storage_usd: storage,
            network_usd: network,
            ops_usd: ops,
            total_usd: total,
            canonical_total_usd: canonical_total,
            max_rel_delta: rel(storage, ledger.storage_usd)
                .max(rel(network, ledger.network_usd))
                .max(rel(ops, ledger.ops_usd)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RequestCounts {
    pub gets: u64,
    pub puts: u64,
    pub deletes: u64,
    pub heads: u64,
    pub gets_local: u64,
    pub gets_remote: u64,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Diagnostics {
    pub evictions: u64,
    pub admissions: u64,
    pub replication_writes: u64,
    pub ttl_fallbacks: u64,
    pub ignored_deletes: u64,
}

/// Everything a run produces. Field order is fixed; identical runs
/// serialize byte-identically.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub policy: String,
    pub mode: String,
    pub consistency: String,
    pub eviction: String,
    pub seed: u64,
    pub horizon_s: f64,
    pub requests: RequestCounts,
    pub byte_hit_ratio: f64,
    pub ledger: CostLedger,
    pub total_usd: f64,
    pub audit: AuditSummary,
    pub diagnostics: Diagnostics,
}

struct Engine<'a> {
    pricing: &'a PricingTable,
    config: &'a SimConfig,
    catalog: Catalog,
    policy: PolicyEngine,
    ledger: CostLedger,
    audit: AuditLog,
    counts: RequestCounts,
    diag: Diagnostics,
    hit_bytes: u64,
    get_bytes: u64,
    exact: bool,
}

impl<'a> Engine<'a> {
    fn charge_intervals(&mut self, intervals: &[ClosedInterval], evictions: bool) {
        for iv in intervals {
            if evictions {
                self.diag.evictions += 1;
            }
            if iv.is_base && !self.config.include_base_storage {
                continue;
            }
            let rate = self.pricing.storage_rate(&iv.region);
            let usd = storage_charge(iv.bytes, rate, iv.end - iv.start);
            log::debug!(
                "storage {} {}B [{}, {}] -> ${usd:.9}",
                iv.region,
                iv.bytes,
                iv.start,
                iv.end
            );
            self.ledger.add_storage(&iv.region, usd);
            self.audit.storage.push(usd);
        }
    }

    fn charge_transfer(&mut self, src: &Region, dst: &Region, bytes: u64, t: f64) {
        let rate = self.pricing.network_rate(src, dst);
        let usd = transfer_charge(bytes, rate);
        log::debug!("transfer {src}->{dst} {bytes}B at t={t} -> ${usd:.9}");
        self.ledger.add_network(src, usd);
        self.audit.network.push(usd);
    }

    fn charge_op(&mut self, region: &Region) {
        if !self.config.charge_ops {
            return;
        }
        let usd = self.pricing.op_rate_per_1000() / 1000.0;
        self.ledger.add_ops(region, usd);
        self.audit.ops.push(usd);
    }

    fn sweep_object(&mut self, key: &str, now: f64) {
        if !self.exact {
            return;
        }
        let closed = self
            .catalog
            .sweep_object(DEFAULT_BUCKET, key, now, self.pricing, true);
        self.charge_intervals(&closed, true);
    }

    fn handle_put(&mut self, key: &str, size: u64, region: &Region, t: f64) -> Result<(), SimError> {
        self.counts.puts += 1;
        self.sweep_object(key, t);
        let (version, closed) = self.catalog.put(DEFAULT_BUCKET, key, size, region, t);
        self.charge_intervals(&closed, true);
        self.charge_op(region);
        for target in self.policy.on_write(region, self.pricing) {
            self.charge_transfer(region, &target, size, t);
            self.catalog
                .admit_replica(DEFAULT_BUCKET, key, version, &target, t, f64::INFINITY)?;
            self.diag.replication_writes += 1;
            self.charge_op(&target);
        }
        Ok(())
    }

    fn handle_get(&mut self, key: &str, region: &Region, t: f64) -> Result<(), SimError> {
        self.counts.gets += 1;
        self.sweep_object(key, t);
        self.charge_op(region);
        let plan = self
            .catalog
            .locate(DEFAULT_BUCKET, key, region, self.config.consistency, self.pricing)?;
        match plan {
            ReadPlan::Local { version, size } => {
                self.counts.gets_local += 1;
                self.get_bytes += size;
                self.hit_bytes += size;
                let holders = self.catalog.holders(DEFAULT_BUCKET, key, version, region);
                let ctx = ReadContext {
                    bucket: DEFAULT_BUCKET,
                    key,
                    size,
                    reader: region,
                    hit: true,
                    source: None,
                    holders: &holders,
                    now: t,
                };
                match self.policy.on_read(&ctx, self.pricing)? {
                    ReadDecision::Keep { refresh_ttl } => {
                        self.catalog
                            .record_hit(DEFAULT_BUCKET, key, version, region, t, refresh_ttl);
                    }
                    ReadDecision::EvictNow => {
                        if let Some(iv) =
                            self.catalog
                                .evict_replica_now(DEFAULT_BUCKET, key, version, region, t)
                        {
                            self.charge_intervals(&[iv], true);
                        }
                    }
                    other => unreachable!("hit produced miss decision {other:?}"),
                }
            }
            ReadPlan::Remote {
                version,
                size,
                source,
            } => {
                self.counts.gets_remote += 1;
                self.get_bytes += size;
                self.charge_transfer(&source, region, size, t);
                let holders = self.catalog.holders(DEFAULT_BUCKET, key, version, region);
                let ctx = ReadContext {
                    bucket: DEFAULT_BUCKET,
                    key,
                    size,
                    reader: region,
                    hit: false,
                    source: Some(&source),
                    holders: &holders,
                    now: t,
                };
                match self.policy.on_read(&ctx, self.pricing)? {
                    ReadDecision::Store { ttl } => {
                        if self
                            .catalog
                            .admit_replica(DEFAULT_BUCKET, key, version, region, t, ttl)?
                        {
                            self.diag.admissions += 1;
                            // Admission can lift quorum protection from an
                            // already-expired replica elsewhere.
                            self.sweep_object(key, t);
                        }
                    }
                    ReadDecision::DontStore => {}
                    other => unreachable!("miss produced hit decision {other:?}"),
                }
            }
        }
        Ok(())
    }

    fn handle_delete(&mut self, key: &str, region: &Region, t: f64) {
        self.counts.deletes += 1;
        self.sweep_object(key, t);
        self.charge_op(region);
        match self.catalog.delete(DEFAULT_BUCKET, key, t) {
            Some(closed) => self.charge_intervals(&closed, false),
            None => self.diag.ignored_deletes += 1,
        }
    }

    fn handle_head(&mut self, key: &str, region: &Region, t: f64) {
        self.counts.heads += 1;
        self.charge_op(region);
        if self.config.head_resets_ttl {
            self.sweep_object(key, t);
            if let Ok(ReadPlan::Local { version, .. }) =
                self.catalog
                    .locate(DEFAULT_BUCKET, key, region, self.config.consistency, self.pricing)
            {
                self.catalog
                    .record_hit(DEFAULT_BUCKET, key, version, region, t, None);
            }
        }
    }
}

/// Replays `trace` under `kind`, returning the full cost report.
/// Deterministic: identical inputs produce a byte-identical report.
pub fn run(
    trace: &Trace,
    pricing: &PricingTable,
    kind: &PolicyKind,
    config: &SimConfig,
) -> Result<SimReport, SimError> {
    for req in &trace.requests {
        if req.region.is_empty() {
            return Err(SimError::MissingRegion { t: req.t });
        }
        if !pricing.contains(&req.region) {
            return Err(SimError::UnknownRegion {
                region: req.region.to_string(),
                t: req.t,
            });
        }
    }

    let policy = PolicyEngine::new(kind.clone(), trace, pricing)?;
    let exact = matches!(config.eviction, EvictionAccounting::Exact);
    let mut engine = Engine {
        pricing,
        config,
        catalog: Catalog::new(config.mode, config.versioning),
        policy,
        ledger: CostLedger::default(),
        audit: AuditLog::default(),
        counts: RequestCounts::default(),
        diag: Diagnostics::default(),
        hit_bytes: 0,
        get_bytes: 0,
        exact,
    };

    let mut next_recompute = if engine.policy.needs_ticks() {
        config.recompute_interval
    } else {
        f64::INFINITY
    };
    let mut next_scan = match config.eviction {
        EvictionAccounting::Periodic { interval } => interval,
        EvictionAccounting::Exact => f64::INFINITY,
    };

    macro_rules! fire_ticks_until {
        ($bound:expr) => {
            while next_scan.min(next_recompute) <= $bound {
                if next_scan <= next_recompute {
                    let closed = engine
                        .catalog
                        .sweep_all(next_scan, pricing, false);
                    engine.charge_intervals(&closed, true);
                    next_scan += match config.eviction {
                        EvictionAccounting::Periodic { interval } => interval,
                        EvictionAccounting::Exact => unreachable!(),
                    };
                } else {
                    engine.policy.on_tick(next_recompute, pricing);
                    next_recompute += config.recompute_interval;
                }
            }
        };
    }

    for req in &trace.requests {
        fire_ticks_until!(req.t);
        match req.op {
            Op::Put => engine.handle_put(&req.key, req.size, &req.region, req.t)?,
            Op::Get => engine.handle_get(&req.key, &req.region, req.t)?,
            Op::Delete => engine.handle_delete(&req.key, &req.region, req.t),
            Op::Head => engine.handle_head(&req.key, &req.region, req.t),
        }
    }
    fire_ticks_until!(trace.horizon);

    if exact {
        let closed = engine.catalog.sweep_all(trace.horizon, pricing, true);
        engine.charge_intervals(&closed, true);
    }
    let survivors = engine.catalog.close_survivors(trace.horizon);
    engine.charge_intervals(&survivors, false);

    let byte_hit_ratio = if engine.get_bytes > 0 {
        engine.hit_bytes as f64 / engine.get_bytes as f64
    } else {
        0.0
    };
    engine.diag.ttl_fallbacks = engine.policy.ttl_fallbacks;

    let audit = engine.audit.summarize(&engine.ledger);
    Ok(SimReport {
        policy: kind.to_string(),
        mode: config.mode.as_str(),
        consistency: config.consistency.as_str().to_string(),
        eviction: config.eviction.as_str(),
        seed: config.seed,
        horizon_s: trace.horizon,
        requests: engine.counts,
        byte_hit_ratio,
        ledger: engine.ledger,
        total_usd: 0.0,
        audit,
        diagnostics: engine.diag,
    }
    .finish())
}

impl SimReport {
    fn finish(mut self) -> Self {
        self.total_usd = self.ledger.total_usd();
        self
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
