//! Pluggable placement and eviction decisions: for each write, where to
//! replicate; for each read, whether to keep a local copy and with what
//! TTL. Implements the adaptive policy, the clairvoyant greedy oracle,
//! the break-even TTL policy, and the remaining baselines.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::histogram::{GenerationalHistogram, LastAccessTable, TtlHistogram};
use crate::pricing::{PricingTable, Region};
use crate::trace::{Op, Trace};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("bad policy string {0:?}: {1}")]
    BadPolicyString(String, String),
    #[error("bad duration {0:?}: expected <number><s|min|h|d|mo>")]
    BadDuration(String),
    #[error("ewma alpha must be in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("not a base-cache trace: {0}")]
    NotBaseCache(String),
    #[error("clairvoyant policy invoked without a precomputed next-access map")]
    MissingOracle,
}

/// Parses durations like `90s`, `30min`, `12h`, `45d`, `1.5mo`; a bare
/// number is seconds. A month is 30 days.
pub fn parse_duration(text: &str) -> Result<f64, PolicyError> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|(_, c)| c.is_ascii_alphabetic())
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| PolicyError::BadDuration(text.to_string()))?;
    if !value.is_finite() || value < 0.0 {
        return Err(PolicyError::BadDuration(text.to_string()));
    }
    let secs = match unit {
        "" | "s" => value,
        "min" => value * 60.0,
        "h" => value * 3_600.0,
        "d" => value * crate::DAY_SECS,
        "mo" => value * crate::MONTH_SECS,
        _ => return Err(PolicyError::BadDuration(text.to_string())),
    };
    Ok(secs)
}

/// The policy under simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    AlwaysEvict,
    AlwaysStore,
    FixedTtl(f64),
    TevenTtl,
    Adaptive { perf_value: Option<f64> },
    Ewma { alpha: f64 },
    /// `None` replicates to every other region at write time.
    ReplicateOnWrite { targets: Option<Vec<Region>> },
    Clairvoyant,
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    /// Grammar: `always-evict | always-store | fixed-ttl:<dur> | teven |
    /// adaptive[:u=<usd_per_gb>] | ewma[:alpha=<f>] |
    /// replicate-on-write[:<regions|all>] | cgp`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let no_arg = |kind: PolicyKind| match rest {
            None => Ok(kind),
            Some(_) => Err(PolicyError::BadPolicyString(
                s.to_string(),
                "unexpected argument".into(),
            )),
        };
        match head {
            "always-evict" => no_arg(PolicyKind::AlwaysEvict),
            "always-store" => no_arg(PolicyKind::AlwaysStore),
            "teven" => no_arg(PolicyKind::TevenTtl),
            "cgp" => no_arg(PolicyKind::Clairvoyant),
            "fixed-ttl" => {
                let arg = rest.ok_or_else(|| {
                    PolicyError::BadPolicyString(s.to_string(), "missing duration".into())
                })?;
                Ok(PolicyKind::FixedTtl(parse_duration(arg)?))
            }
            "adaptive" => {
                let perf_value = match rest {
                    None => None,
                    Some(arg) => {
                        let v = arg.strip_prefix("u=").ok_or_else(|| {
                            PolicyError::BadPolicyString(s.to_string(), "expected u=<f>".into())
                        })?;
                        let u: f64 = v.parse().map_err(|_| {
                            PolicyError::BadPolicyString(s.to_string(), "bad u value".into())
                        })?;
                        if !u.is_finite() || u < 0.0 {
                            return Err(PolicyError::BadPolicyString(
                                s.to_string(),
                                "u must be >= 0".into(),
                            ));
                        }
                        Some(u)
                    }
                };
                Ok(PolicyKind::Adaptive { perf_value })
            }
            "ewma" => {
                let alpha = match rest {
                    None => 0.5,
                    Some(arg) => {
                        let v = arg.strip_prefix("alpha=").ok_or_else(|| {
                            PolicyError::BadPolicyString(s.to_string(), "expected alpha=<f>".into())
                        })?;
                        v.parse().map_err(|_| {
                            PolicyError::BadPolicyString(s.to_string(), "bad alpha".into())
                        })?
                    }
                };
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(PolicyError::BadAlpha(alpha));
                }
                Ok(PolicyKind::Ewma { alpha })
            }
            "replicate-on-write" => {
                let targets = match rest {
                    None | Some("all") => None,
                    Some(list) => Some(
                        list.split(',')
                            .filter(|t| !t.is_empty())
                            .map(Region::new)
                            .collect(),
                    ),
                };
                Ok(PolicyKind::ReplicateOnWrite { targets })
            }
            _ => Err(PolicyError::BadPolicyString(
                s.to_string(),
                "unknown policy".into(),
            )),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::AlwaysEvict => write!(f, "always-evict"),
            PolicyKind::AlwaysStore => write!(f, "always-store"),
            PolicyKind::FixedTtl(d) => write!(f, "fixed-ttl:{d}s"),
            PolicyKind::TevenTtl => write!(f, "teven"),
            PolicyKind::Adaptive { perf_value: None } => write!(f, "adaptive"),
            PolicyKind::Adaptive {
                perf_value: Some(u),
            } => write!(f, "adaptive:u={u}"),
            PolicyKind::Ewma { alpha } => write!(f, "ewma:alpha={alpha}"),
            PolicyKind::ReplicateOnWrite { targets: None } => write!(f, "replicate-on-write:all"),
            PolicyKind::ReplicateOnWrite {
                targets: Some(list),
            } => {
                write!(f, "replicate-on-write:")?;
                for (i, r) in list.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{r}")?;
                }
                Ok(())
            }
            PolicyKind::Clairvoyant => write!(f, "cgp"),
        }
    }
}

/// Per-directed-edge TTL values for one bucket, refreshed periodically.
#[derive(Debug, Clone)]
pub struct EdgeTtlTable {
    entries: BTreeMap<(Region, Region), f64>,
    pub computed_at: f64,
}

impl EdgeTtlTable {
    /// Cold-start table: every edge at its break-even time.
    pub fn cold(pricing: &PricingTable, now: f64) -> Self {
        let mut entries = BTreeMap::new();
        for src in pricing.regions() {
            for dst in pricing.regions() {
                if src != dst {
                    entries.insert((src.clone(), dst.clone()), pricing.break_even(src, dst));
                }
            }
        }
        EdgeTtlTable {
            entries,
            computed_at: now,
        }
    }

    pub fn get(&self, src: &Region, dst: &Region) -> f64 {
        self.entries[&(src.clone(), dst.clone())]
    }

    /// TTL for an object at `dst`: the minimum edge TTL over holder
    /// regions whose replica outlives the assignment. A holder whose own
    /// eviction deadline lands before `now + TTL(holder, dst)` cannot be
    /// relied on and is filtered out; if the filter removes everyone, the
    /// non-evictable holders are tried, then all holders (flagged as a
    /// fallback in the returned bool).
    pub fn assign_object_ttl(
        &self,
        dst: &Region,
        holders: &[(Region, f64)],
        now: f64,
    ) -> (f64, bool) {
        if holders.is_empty() {
            return (f64::INFINITY, false);
        }
        let mut filtered = f64::INFINITY;
        let mut any_filtered = false;
        let mut non_evictable = f64::INFINITY;
        let mut any_non_evictable = false;
        let mut unfiltered = f64::INFINITY;
        for (holder, deadline) in holders {
            let edge = self.get(holder, dst);
            unfiltered = unfiltered.min(edge);
            if *deadline >= now + edge {
                filtered = filtered.min(edge);
                any_filtered = true;
            }
            if deadline.is_infinite() {
                non_evictable = non_evictable.min(edge);
                any_non_evictable = true;
            }
        }
        if any_filtered {
            (filtered, false)
        } else if any_non_evictable {
            (non_evictable, false)
        } else {
            (unfiltered, true)
        }
    }
}

/// Recomputes every directed edge TTL for one bucket from the
/// destination scopes' histograms: `best_ttl(hist(dst), N(src,dst),
/// S(dst))`, latency-adjusted when a user performance value is set, and
/// the break-even time for scopes with no observed mass.
pub fn recompute_edge_ttls(
    scopes: &BTreeMap<Region, TtlHistogram>,
    pricing: &PricingTable,
    perf_value: Option<f64>,
    now: f64,
) -> EdgeTtlTable {
    let mut entries = BTreeMap::new();
    for dst in pricing.regions() {
        let hist = scopes.get(dst).filter(|h| h.mass() > 0.0);
        for src in pricing.regions() {
            if src == dst {
                continue;
            }
            let ttl = match hist {
                None => pricing.break_even(src, dst),
                Some(h) => {
                    let n = pricing.network_rate(src, dst);
                    let s = pricing.storage_rate(dst);
                    match perf_value {
                        None => h.best_ttl(n, s),
                        Some(u) => h.latency_adjusted_ttl(n, s, u),
                    }
                }
            };
            entries.insert((src.clone(), dst.clone()), ttl);
        }
    }
    EdgeTtlTable {
        entries,
        computed_at: now,
    }
}

/// Exact next-read gaps for the clairvoyant policy, precomputed from a
/// base-and-cache trace.
#[derive(Debug, Clone)]
pub struct CgpOracle {
    pub base: Region,
    pub cache: Region,
    gaps: HashMap<String, Vec<f64>>,
}

impl CgpOracle {
    /// Gap to the next GET after the `index`-th GET of `key`; infinity
    /// when there is no next read.
    pub fn next_gap(&self, key: &str, index: usize) -> f64 {
        self.gaps
            .get(key)
            .and_then(|v| v.get(index))
            .copied()
            .unwrap_or(f64::INFINITY)
    }
}

/// Scans a base-and-cache trace and returns, per key and per GET index,
/// the time until that object's next GET (infinite for the final one).
pub fn cgp_precompute(trace: &Trace) -> Result<CgpOracle, PolicyError> {
    let mut write_region: Option<&Region> = None;
    let mut read_region: Option<&Region> = None;
    for req in &trace.requests {
        let slot = match req.op {
            Op::Put | Op::Delete => &mut write_region,
            Op::Get | Op::Head => &mut read_region,
        };
        match slot {
            None => *slot = Some(&req.region),
            Some(r) if *r == &req.region => {}
            Some(r) => {
                return Err(PolicyError::NotBaseCache(format!(
                    "{} requests span regions {} and {}",
                    req.op.as_str(),
                    r,
                    req.region
                )))
            }
        }
    }
    let base = write_region
        .ok_or_else(|| PolicyError::NotBaseCache("trace has no writes".into()))?
        .clone();
    let cache = read_region
        .ok_or_else(|| PolicyError::NotBaseCache("trace has no reads".into()))?
        .clone();
    if base == cache {
        return Err(PolicyError::NotBaseCache(
            "write and read regions coincide".into(),
        ));
    }

    let mut get_times: HashMap<String, Vec<f64>> = HashMap::new();
    for req in &trace.requests {
        if req.op == Op::Get {
            get_times.entry(req.key.clone()).or_default().push(req.t);
        }
    }
    let gaps = get_times
        .into_iter()
        .map(|(key, times)| {
            let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
            gaps.push(f64::INFINITY);
            (key, gaps)
        })
        .collect();
    Ok(CgpOracle { base, cache, gaps })
}

/// Per-object EWMA prediction state at one region.
#[derive(Debug, Clone)]
pub struct EwmaState {
    pub last_access: f64,
    pub estimate: f64,
    pub gaps_seen: u32,
    pub t_even: f64,
}

/// One EWMA step: `alpha * current_gap + (1 - alpha) * previous_estimate`.
pub fn ewma_update(previous: f64, gap: f64, alpha: f64) -> f64 {
    alpha * gap + (1.0 - alpha) * previous
}

impl EwmaState {
    fn new(now: f64, t_even: f64) -> Self {
        EwmaState {
            last_access: now,
            estimate: 0.0,
            gaps_seen: 0,
            t_even,
        }
    }

    fn observe(&mut self, now: f64, alpha: f64) {
        let gap = now - self.last_access;
        self.last_access = now;
        self.gaps_seen += 1;
        if self.gaps_seen == 1 {
            self.estimate = gap;
        } else {
            self.estimate = ewma_update(self.estimate, gap, alpha);
        }
    }

    /// Predicted next gap; the break-even time until two gaps were seen.
    pub fn prediction(&self) -> f64 {
        if self.gaps_seen >= 2 {
            self.estimate
        } else {
            self.t_even
        }
    }

    /// TTL implied by the prediction: wait out the predicted gap when it
    /// exceeds break-even, otherwise keep until the next observation.
    pub fn ttl(&self) -> f64 {
        let p = self.prediction();
        if p > self.t_even {
            p.max(0.0)
        } else {
            f64::INFINITY
        }
    }
}

/// Everything a policy may consult when deciding a read.
#[derive(Debug)]
pub struct ReadContext<'a> {
    pub bucket: &'a str,
    pub key: &'a str,
    pub size: u64,
    pub reader: &'a Region,
    pub hit: bool,
    /// Chosen source region; present exactly when the read is a miss.
    pub source: Option<&'a Region>,
    /// Other regions holding the version, with eviction deadlines.
    pub holders: &'a [(Region, f64)],
    pub now: f64,
}

/// Outcome of a read decision. `Store`/`DontStore` answer misses;
/// `Keep`/`EvictNow` answer local hits.
#[derive(Debug, Clone, PartialEq)]
pub enum ReadDecision {
    Store { ttl: f64 },
    DontStore,
    Keep { refresh_ttl: Option<f64> },
    EvictNow,
}

#[derive(Debug)]
struct ScopeState {
    generations: GenerationalHistogram,
    last: LastAccessTable,
}

impl ScopeState {
    fn new(now: f64) -> Self {
        ScopeState {
            generations: GenerationalHistogram::new(now),
            last: LastAccessTable::new(),
        }
    }

    /// Merged histogram with current last-access weights folded in.
    fn snapshot(&self, now: f64) -> TtlHistogram {
        let mut h = self.generations.merged();
        h.set_last_weights(self.last.build_last(now));
        h
    }
}

/// Stateful policy instance driving one simulation run.
pub struct PolicyEngine {
    kind: PolicyKind,
    scopes: BTreeMap<(String, Region), ScopeState>,
    tables: BTreeMap<String, EdgeTtlTable>,
    ewma: HashMap<(Region, String), EwmaState>,
    oracle: Option<CgpOracle>,
    cursors: HashMap<String, usize>,
    /// Times `assign_object_ttl` fell back to filtered-out holders.
    pub ttl_fallbacks: u64,
}

impl PolicyEngine {
    pub fn new(
        kind: PolicyKind,
        trace: &Trace,
        _pricing: &PricingTable,
    ) -> Result<Self, PolicyError> {
        let oracle = match kind {
            PolicyKind::Clairvoyant => Some(cgp_precompute(trace)?),
            _ => None,
        };
        Ok(PolicyEngine {
            kind,
            scopes: BTreeMap::new(),
            tables: BTreeMap::new(),
            ewma: HashMap::new(),
            oracle,
            cursors: HashMap::new(),
            ttl_fallbacks: 0,
        })
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    /// Only the adaptive policy needs periodic recompute ticks.
    pub fn needs_ticks(&self) -> bool {
        matches!(self.kind, PolicyKind::Adaptive { .. })
    }

    /// Periodic maintenance: rotate old histogram generations and refresh
    /// every bucket's edge-TTL table from current statistics.
    pub fn on_tick(&mut self, now: f64, pricing: &PricingTable) {
        let PolicyKind::Adaptive { perf_value } = self.kind else {
            return;
        };
        for ((_, region), scope) in self.scopes.iter_mut() {
            let retention = pricing.max_break_even_into(region);
            if retention.is_finite() && retention > 0.0 {
                if now - scope.generations.active_started_at() >= 2.0 * retention {
                    scope.generations.rotate(now);
                }
                scope.generations.maintain(now, retention);
            }
        }
        let buckets: Vec<String> = {
            let mut b: Vec<String> = self.scopes.keys().map(|(b, _)| b.clone()).collect();
            b.dedup();
            b
        };
        for bucket in buckets {
            let mut per_dst: BTreeMap<Region, TtlHistogram> = BTreeMap::new();
            for ((b, region), scope) in &self.scopes {
                if b == &bucket {
                    per_dst.insert(region.clone(), scope.snapshot(now));
                }
            }
            let table = recompute_edge_ttls(&per_dst, pricing, perf_value, now);
            self.tables.insert(bucket, table);
        }
    }

    /// Extra replica targets for a write; empty for every policy except
    /// replicate-on-write. The local copy is always placed by the caller.
    pub fn on_write(&mut self, origin: &Region, pricing: &PricingTable) -> Vec<Region> {
        match &self.kind {
            PolicyKind::ReplicateOnWrite { targets } => {
                let candidates: Vec<Region> = match targets {
                    None => pricing.regions().to_vec(),
                    Some(list) => list.clone(),
                };
                candidates.into_iter().filter(|r| r != origin).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Decides what to do with the object at the reader region.
    pub fn on_read(
        &mut self,
        ctx: &ReadContext<'_>,
        pricing: &PricingTable,
    ) -> Result<ReadDecision, PolicyError> {
        debug_assert_eq!(ctx.source.is_some(), !ctx.hit);
        let keep = ReadDecision::Keep { refresh_ttl: None };
        match &self.kind {
            PolicyKind::AlwaysEvict => Ok(if ctx.hit { keep } else { ReadDecision::DontStore }),
            PolicyKind::AlwaysStore => Ok(if ctx.hit {
                keep
            } else {
                ReadDecision::Store { ttl: f64::INFINITY }
            }),
            PolicyKind::FixedTtl(ttl) => Ok(if ctx.hit {
                keep
            } else {
                ReadDecision::Store { ttl: *ttl }
            }),
            PolicyKind::TevenTtl => Ok(if ctx.hit {
                keep
            } else {
                let src = ctx.source.expect("miss carries a source");
                ReadDecision::Store {
                    ttl: pricing.break_even(src, ctx.reader),
                }
            }),
            PolicyKind::ReplicateOnWrite { .. } => {
                Ok(if ctx.hit { keep } else { ReadDecision::DontStore })
            }
            PolicyKind::Ewma { alpha } => {
                let alpha = *alpha;
                let map_key = (ctx.reader.clone(), ctx.key.to_string());
                let ttl = match self.ewma.get_mut(&map_key) {
                    Some(state) => {
                        state.observe(ctx.now, alpha);
                        state.ttl()
                    }
                    None => {
                        let t_even = match ctx.source {
                            Some(src) => pricing.break_even(src, ctx.reader),
                            None => pricing.max_break_even_into(ctx.reader),
                        };
                        let state = EwmaState::new(ctx.now, t_even);
                        let ttl = state.ttl();
                        self.ewma.insert(map_key, state);
                        ttl
                    }
                };
                Ok(if ctx.hit {
                    ReadDecision::Keep {
                        refresh_ttl: Some(ttl),
                    }
                } else {
                    ReadDecision::Store { ttl }
                })
            }
            PolicyKind::Adaptive { .. } => {
                let scope_key = (ctx.bucket.to_string(), ctx.reader.clone());
                let scope = self
                    .scopes
                    .entry(scope_key)
                    .or_insert_with(|| ScopeState::new(ctx.now));
                match scope.last.observe(ctx.key, ctx.size, ctx.now) {
                    Some(gap) => scope.generations.record_interarrival(ctx.size, gap),
                    None => {
                        if !ctx.hit {
                            scope.generations.record_remote(ctx.size);
                        }
                    }
                }
                let table = self
                    .tables
                    .entry(ctx.bucket.to_string())
                    .or_insert_with(|| EdgeTtlTable::cold(pricing, ctx.now));
                let (ttl, fell_back) = table.assign_object_ttl(ctx.reader, ctx.holders, ctx.now);
                if fell_back {
                    self.ttl_fallbacks += 1;
                }
                Ok(if ctx.hit {
                    ReadDecision::Keep {
                        refresh_ttl: Some(ttl),
                    }
                } else {
                    ReadDecision::Store { ttl }
                })
            }
            PolicyKind::Clairvoyant => {
                let oracle = self.oracle.as_ref().ok_or(PolicyError::MissingOracle)?;
                let index = self.cursors.entry(ctx.key.to_string()).or_insert(0);
                let t_next = oracle.next_gap(ctx.key, *index);
                *index += 1;
                let t_even = pricing.break_even(&oracle.base, &oracle.cache);
                Ok(if t_next <= t_even {
                    if ctx.hit {
                        keep
                    } else {
                        ReadDecision::Store { ttl: t_even }
                    }
                } else if ctx.hit {
                    ReadDecision::EvictNow
                } else {
                    ReadDecision::DontStore
                })
            }
        }
    }

    /// Snapshot of one scope's histogram for reporting.
    pub fn scope_snapshot(&self, bucket: &str, region: &Region, now: f64) -> Option<TtlHistogram> {
        self.scopes
            .get(&(bucket.to_string(), region.clone()))
            .map(|s| s.snapshot(now))
    }
}
