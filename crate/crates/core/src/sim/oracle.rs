//! Validation oracles: an exhaustive keep/evict optimum for small
//! base-and-cache traces, an exact fixed-TTL replay that the expected-cost
//! model is checked against, and the adversarial workload construction
//! that drives any eviction policy toward twice the clairvoyant cost.

use crate::catalog::Mode;
use crate::policy::{cgp_precompute, PolicyKind};
use crate::pricing::{PricingTable, Region};
use crate::sim::{canonical_sum, run, storage_charge, transfer_charge, SimConfig, SimError};
use crate::trace::{Op, Request, Trace};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("{0}")]
    NotBaseCache(String),
    #[error("trace has {0} cache reads; the exhaustive oracle is capped at {MAX_BRUTE_FORCE_GETS}")]
    TooManyGets(usize),
    #[error("unsupported request for the exhaustive oracle: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Largest GET count the exhaustive search will accept (2^n vectors).
pub const MAX_BRUTE_FORCE_GETS: usize = 12;

/// Minimum achievable network + cache-storage cost for a two-region
/// base-and-cache trace, found by enumerating every keep/evict decision
/// vector over the cache reads. Requires at most
/// [`MAX_BRUTE_FORCE_GETS`] GETs, a single PUT per key, and no deletes.
pub fn brute_force_optimal(trace: &Trace, pricing: &PricingTable) -> Result<f64, OracleError> {
    let oracle = cgp_precompute(trace).map_err(|e| OracleError::NotBaseCache(e.to_string()))?;
    let n_rate = pricing.network_rate(&oracle.base, &oracle.cache);
    let s_rate = pricing.storage_rate(&oracle.cache);

    let mut puts_seen: Vec<&str> = Vec::new();
    let mut gets: Vec<&Request> = Vec::new();
    for req in &trace.requests {
        match req.op {
            Op::Put => {
                if puts_seen.contains(&req.key.as_str()) {
                    return Err(OracleError::Unsupported(format!(
                        "key {:?} is written more than once",
                        req.key
                    )));
                }
                puts_seen.push(&req.key);
            }
            Op::Get => gets.push(req),
            Op::Delete => {
                return Err(OracleError::Unsupported("DELETE in oracle trace".into()))
            }
            Op::Head => {}
        }
    }
    if gets.len() > MAX_BRUTE_FORCE_GETS {
        return Err(OracleError::TooManyGets(gets.len()));
    }

    let mut best = f64::INFINITY;
    for vector in 0u32..(1 << gets.len()) {
        let mut held: Vec<(&str, f64)> = Vec::new(); // key -> open time
        let mut charges: Vec<f64> = Vec::new();
        for (i, get) in gets.iter().enumerate() {
            let pos = held.iter().position(|(k, _)| *k == get.key);
            if pos.is_none() {
                charges.push(transfer_charge(get.size, n_rate));
            }
            let keep = vector & (1 << i) != 0;
            match (pos, keep) {
                (None, true) => held.push((&get.key, get.t)),
                (None, false) => {}
                (Some(_), true) => {}
                (Some(p), false) => {
                    let (_, opened) = held.swap_remove(p);
                    charges.push(storage_charge(get.size, s_rate, get.t - opened));
                }
            }
        }
        for (key, opened) in &held {
            let size = gets
                .iter()
                .rev()
                .find(|g| g.key == *key)
                .map(|g| g.size)
                .unwrap_or(0);
            charges.push(storage_charge(size, s_rate, trace.horizon - opened));
        }
        let total = canonical_sum(&mut charges);
        if total < best {
            best = total;
        }
    }
    Ok(best)
}

/// One access in a single-scope stream.
#[derive(Debug, Clone)]
pub struct ScopeAccess {
    pub t: f64,
    pub key: String,
    pub size: u64,
}

/// A time-ordered access stream for one (bucket, region) scope.
#[derive(Debug, Clone, Default)]
pub struct ScopeStream {
    pub accesses: Vec<ScopeAccess>,
    pub horizon: f64,
}

/// Exact realized cost of running one scope under a TTL-reset cache:
/// every first read fetches remotely, re-reads within the TTL pay storage
/// for the gap, re-reads beyond it pay a full TTL of storage plus a
/// refetch, and each final access is followed by one TTL of storage
/// (capped at the horizon only for an infinite TTL).
pub fn replay_fixed_ttl(stream: &ScopeStream, ttl: f64, n_rate: f64, s_rate: f64) -> f64 {
    assert!(ttl >= 0.0);
    let mut last: std::collections::BTreeMap<&str, (f64, u64)> = std::collections::BTreeMap::new();
    let mut cost = 0.0;
    for access in &stream.accesses {
        match last.insert(&access.key, (access.t, access.size)) {
            None => cost += transfer_charge(access.size, n_rate),
            Some((prev_t, prev_size)) => {
                let gap = access.t - prev_t;
                if gap <= ttl {
                    cost += storage_charge(prev_size, s_rate, gap);
                } else {
                    cost += storage_charge(prev_size, s_rate, ttl);
                    cost += transfer_charge(access.size, n_rate);
                }
            }
        }
    }
    for (t, size) in last.values() {
        if ttl.is_finite() {
            cost += storage_charge(*size, s_rate, ttl);
        } else {
            cost += storage_charge(*size, s_rate, stream.horizon - t);
        }
    }
    cost
}

/// Probes whether `kind` still holds the cached object `offset` seconds
/// after the prefix's last read, by appending a probe GET and replaying.
fn probe_holds(
    kind: &PolicyKind,
    pricing: &PricingTable,
    prefix: &[Request],
    cache: &Region,
    key: &str,
    size: u64,
    last_get: f64,
    offset: f64,
    prefix_remote: u64,
) -> Result<bool, SimError> {
    let mut requests = prefix.to_vec();
    let t = last_get + offset;
    requests.push(Request {
        t,
        op: Op::Get,
        key: key.to_string(),
        size,
        region: cache.clone(),
    });
    let trace = Trace::new(requests, t + 1.0);
    let report = run(&trace, pricing, kind, &probe_config())?;
    Ok(report.requests.gets_remote == prefix_remote)
}

fn probe_config() -> SimConfig {
    SimConfig {
        mode: Mode::Fb,
        ..SimConfig::default()
    }
}

/// Builds the adversarial workload against a black-box policy on a
/// two-region pricing table: while the policy evicts before the
/// break-even time, request the object again just after the observed
/// eviction; once it holds past break-even, stop requesting. After `k`
/// rounds the policy's cost approaches twice the clairvoyant cost.
pub fn adversary(
    kind: &PolicyKind,
    pricing: &PricingTable,
    rounds: usize,
) -> Result<Trace, SimError> {
    let regions = pricing.regions();
    assert!(regions.len() >= 2, "adversary needs a 2-region pricing table");
    let base = regions[0].clone();
    let cache = regions[1].clone();
    let t_even = pricing.break_even(&base, &cache);
    assert!(
        t_even.is_finite() && t_even > 0.0,
        "adversary needs a finite positive break-even time"
    );
    let size: u64 = 1_000_000_000;
    let key = "victim";

    let mut requests = vec![
        Request {
            t: 0.0,
            op: Op::Put,
            key: key.to_string(),
            size,
            region: base.clone(),
        },
        Request {
            t: 60.0,
            op: Op::Get,
            key: key.to_string(),
            size,
            region: cache.clone(),
        },
    ];
    let mut last_get = 60.0;
    let mut prefix_remote = 1; // the first GET always fetches remotely

    for _ in 0..rounds {
        if probe_holds(
            kind,
            pricing,
            &requests,
            &cache,
            key,
            size,
            last_get,
            t_even,
            prefix_remote,
        )? {
            // Holds through break-even: go silent and let it pay storage.
            break;
        }
        // Bisect the eviction boundary in (0, t_even]; `hi` always ends on
        // a verified miss offset.
        let mut lo = 0.0;
        let mut hi = t_even;
        for _ in 0..50 {
            let mid = (lo + hi) / 2.0;
            if probe_holds(
                kind,
                pricing,
                &requests,
                &cache,
                key,
                size,
                last_get,
                mid,
                prefix_remote,
            )? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        last_get += hi;
        requests.push(Request {
            t: last_get,
            op: Op::Get,
            key: key.to_string(),
            size,
            region: cache.clone(),
        });
        prefix_remote += 1;
    }

    Ok(Trace::new(requests, last_get + 2.0 * t_even))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::{LastAccessTable, TtlHistogram};
    use crate::{DAY_SECS, MONTH_SECS};

    fn pricing() -> PricingTable {
        PricingTable::from_rates(
            &["A", "B"],
            &[("A", 0.026), ("B", 0.026)],
            &[("A", "B", 0.02), ("B", "A", 0.02)],
        )
        .unwrap()
    }

    fn req(t: f64, op: Op, key: &str, size: u64, region: &str) -> Request {
        Request {
            t,
            op,
            key: key.to_string(),
            size,
            region: Region::new(region),
        }
    }

    const GB: u64 = 1_000_000_000;

    #[test]
    fn brute_force_single_get() {
        let trace = Trace::new(
            vec![req(0.0, Op::Put, "k", GB, "A"), req(10.0, Op::Get, "k", GB, "B")],
            MONTH_SECS,
        );
        let best = brute_force_optimal(&trace, &pricing()).unwrap();
        assert!((best - 0.02).abs() < 1e-15);
    }

    #[test]
    fn brute_force_two_gets_short_gap() {
        let gap = DAY_SECS;
        let trace = Trace::new(
            vec![
                req(0.0, Op::Put, "k", GB, "A"),
                req(10.0, Op::Get, "k", GB, "B"),
                req(10.0 + gap, Op::Get, "k", GB, "B"),
            ],
            MONTH_SECS,
        );
        let best = brute_force_optimal(&trace, &pricing()).unwrap();
        let expected = 0.02 + storage_charge(GB, 0.026, gap);
        assert!((best - expected).abs() < 1e-15);
    }

    #[test]
    fn brute_force_two_gets_long_gap() {
        let gap = 2.0 * MONTH_SECS;
        let trace = Trace::new(
            vec![
                req(0.0, Op::Put, "k", GB, "A"),
                req(10.0, Op::Get, "k", GB, "B"),
                req(10.0 + gap, Op::Get, "k", GB, "B"),
            ],
            3.0 * MONTH_SECS,
        );
        let best = brute_force_optimal(&trace, &pricing()).unwrap();
        assert!((best - 0.04).abs() < 1e-15);
    }

    #[test]
    fn brute_force_rejects_oversized_traces() {
        let mut requests = vec![req(0.0, Op::Put, "k", GB, "A")];
        for i in 0..13 {
            requests.push(req(10.0 + i as f64, Op::Get, "k", GB, "B"));
        }
        let trace = Trace::new(requests, 100.0);
        assert!(matches!(
            brute_force_optimal(&trace, &pricing()),
            Err(OracleError::TooManyGets(13))
        ));
    }

    #[test]
    fn replay_ttl_zero_pays_network_every_time() {
        let stream = ScopeStream {
            accesses: vec![
                ScopeAccess { t: 0.0, key: "a".into(), size: GB },
                ScopeAccess { t: 50.0, key: "a".into(), size: GB },
                ScopeAccess { t: 90.0, key: "a".into(), size: GB },
            ],
            horizon: 1000.0,
        };
        let cost = replay_fixed_ttl(&stream, 0.0, 0.02, 0.026);
        assert!((cost - 3.0 * 0.02).abs() < 1e-15);
    }

    #[test]
    fn replay_infinite_ttl_stores_to_horizon() {
        let stream = ScopeStream {
            accesses: vec![
                ScopeAccess { t: 0.0, key: "a".into(), size: GB },
                ScopeAccess { t: 50.0, key: "a".into(), size: GB },
                ScopeAccess { t: 100.0, key: "b".into(), size: GB },
            ],
            horizon: 1000.0,
        };
        let cost = replay_fixed_ttl(&stream, f64::INFINITY, 0.02, 0.026);
        let expected = 2.0 * 0.02
            + storage_charge(GB, 0.026, 50.0)
            + storage_charge(GB, 0.026, 950.0)
            + storage_charge(GB, 0.026, 900.0);
        assert!((cost - expected).abs() < 1e-15);
    }

    #[test]
    fn replay_matches_expected_cost_within_cell_error() {
        // deterministic mixed stream: some short gaps, some long
        let mut accesses = Vec::new();
        let keys = ["a", "b", "c"];
        for (i, key) in keys.iter().enumerate() {
            let mut t = 100.0 * i as f64;
            for j in 0..6 {
                accesses.push(ScopeAccess {
                    t,
                    key: key.to_string(),
                    size: GB,
                });
                t += 40.0 + 30_000.0 * (i as f64 + 1.0) * (j as f64 + 1.0);
            }
        }
        accesses.sort_by(|a, b| a.t.total_cmp(&b.t));
        let horizon = accesses.last().unwrap().t + MONTH_SECS;
        let stream = ScopeStream { accesses, horizon };

        // build the histogram the way a simulation scope would
        let mut hist = TtlHistogram::new(0.0);
        let mut table = LastAccessTable::new();
        for a in &stream.accesses {
            match table.observe(&a.key, a.size, a.t) {
                Some(gap) => hist.record_interarrival(a.size, gap),
                None => hist.record_remote(a.size),
            }
        }
        hist.set_last_weights(table.build_last(horizon));

        for ttl in [30.0, 600.0, 50_000.0, 2e5, MONTH_SECS] {
            let model = hist.expected_cost(ttl, 0.02, 0.026);
            let replay = replay_fixed_ttl(&stream, ttl, 0.02, 0.026);
            // hit-term discretization: 2% of storage plus one linear cell
            let storage_term = model - hist.remote_bytes() / 1e9 * 0.02;
            let bound = 0.02 * storage_term.abs()
                + storage_charge(hist.hist_total() as u64, 0.026, 1.0)
                + 1e-12;
            assert!(
                (model - replay).abs() <= bound,
                "ttl={ttl}: model {model} vs replay {replay} (bound {bound})"
            );
        }
    }

    #[test]
    fn adversary_against_teven_stops_after_one_round() {
        let table = pricing();
        let trace = adversary(&PolicyKind::TevenTtl, &table, 20).unwrap();
        // holds through break-even, so the workload is a single GET
        assert_eq!(
            trace.requests.iter().filter(|r| r.op == Op::Get).count(),
            1
        );
        let teven_cost = run(&trace, &table, &PolicyKind::TevenTtl, &SimConfig::default())
            .unwrap()
            .total_usd;
        let cgp_cost = run(&trace, &table, &PolicyKind::Clairvoyant, &SimConfig::default())
            .unwrap()
            .total_usd;
        let ratio = teven_cost / cgp_cost;
        assert!((ratio - 2.0).abs() < 1e-6, "ratio {ratio}");
    }

    #[test]
    fn adversary_drives_short_ttl_policy_past_two() {
        let table = pricing();
        let t_even = table.break_even(&Region::new("A"), &Region::new("B"));
        let victim = PolicyKind::FixedTtl(t_even / 4.0);
        let trace = adversary(&victim, &table, 20).unwrap();
        assert!(trace.requests.iter().filter(|r| r.op == Op::Get).count() >= 20);
        let p_cost = run(&trace, &table, &victim, &SimConfig::default())
            .unwrap()
            .total_usd;
        let cgp_cost = run(&trace, &table, &PolicyKind::Clairvoyant, &SimConfig::default())
            .unwrap()
            .total_usd;
        assert!(p_cost / cgp_cost >= 1.9, "ratio {}", p_cost / cgp_cost);
    }

    #[test]
    fn adversary_against_always_store_cost_grows_with_horizon() {
        let table = pricing();
        let trace = adversary(&PolicyKind::AlwaysStore, &table, 1).unwrap();
        let run_cost = |horizon: f64| {
            let mut t = trace.clone();
            t.horizon = horizon;
            run(&t, &table, &PolicyKind::AlwaysStore, &SimConfig::default())
                .unwrap()
                .total_usd
        };
        let short = run_cost(trace.horizon);
        let long = run_cost(trace.horizon * 4.0);
        assert!(long > 2.0 * short);
    }
}
