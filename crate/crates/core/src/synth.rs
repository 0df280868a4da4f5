//! Seeded synthetic workload builders for experiments and validation:
//! random base-and-cache traces, hot-repeat and one-hit-wonder shapes,
//! and the reference two-region pricing table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pricing::{PricingTable, Region};
use crate::trace::{Op, Request, Trace};
use crate::DAY_SECS;

/// Two regions priced like neighboring standard-storage regions: storage
/// 0.026 USD/GB-month both sides, network 0.02 USD/GB each way, so the
/// break-even time is just under 0.77 months.
pub fn reference_pricing(base: &str, cache: &str) -> PricingTable {
    PricingTable::from_rates(
        &[base, cache],
        &[(base, 0.026), (cache, 0.026)],
        &[(base, cache, 0.02), (cache, base, 0.02)],
    )
    .expect("reference pricing is valid")
}

/// Parameters for [`random_base_cache`].
#[derive(Debug, Clone)]
pub struct RandomBaseCache {
    pub base: Region,
    pub cache: Region,
    pub max_objects: usize,
    pub max_gets: usize,
    /// Gap scale anchor; gaps are drawn both well below and well above it.
    pub t_even_s: f64,
    pub seed: u64,
}

/// Random two-region workload: every object is written once at the base
/// region, then read at the cache region with per-object gap scales
/// straddling the break-even anchor. Deterministic in the seed.
pub fn random_base_cache(cfg: &RandomBaseCache) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_objects = rng.gen_range(1..=cfg.max_objects.max(1));
    let total_gets = rng.gen_range(n_objects..=cfg.max_gets.max(n_objects));

    let mut requests = Vec::new();
    let mut gets_left = total_gets;
    for i in 0..n_objects {
        let key = format!("obj-{i:04}");
        // log-uniform sizes between 1 KB and 2 GB
        let size = (1e3 * (2e6f64).powf(rng.gen::<f64>())) as u64;
        requests.push(Request {
            t: i as f64,
            op: Op::Put,
            key: key.clone(),
            size,
            region: cfg.base.clone(),
        });

        let remaining_objects = n_objects - i - 1;
        let budget = gets_left.saturating_sub(remaining_objects);
        if budget == 0 {
            continue;
        }
        let n_gets = rng.gen_range(1..=budget.min(40));
        gets_left -= n_gets;
        // per-object gap scale: from minutes up to a few break-even times
        let scale = cfg.t_even_s * (0.001f64 * (3000.0f64).powf(rng.gen::<f64>()));
        let mut t = i as f64 + 30.0 + rng.gen::<f64>() * scale;
        for _ in 0..n_gets {
            requests.push(Request {
                t,
                op: Op::Get,
                key: key.clone(),
                size,
                region: cfg.cache.clone(),
            });
            t += scale * (0.2 + 1.6 * rng.gen::<f64>());
        }
    }

    let last = requests.iter().map(|r| r.t).fold(0.0, f64::max);
    Trace::new(requests, last + 1.5 * cfg.t_even_s)
}

/// Every object is written once and then re-read daily at the cache
/// region for `days` days.
pub fn hot_repeat(base: &Region, cache: &Region, n_objects: usize, days: usize, size: u64) -> Trace {
    let mut requests = Vec::new();
    for i in 0..n_objects {
        let key = format!("hot-{i:04}");
        requests.push(Request {
            t: i as f64,
            op: Op::Put,
            key: key.clone(),
            size,
            region: base.clone(),
        });
        for day in 1..=days {
            requests.push(Request {
                t: day as f64 * DAY_SECS + i as f64,
                op: Op::Get,
                key: key.clone(),
                size,
                region: cache.clone(),
            });
        }
    }
    Trace::new(requests, (days + 1) as f64 * DAY_SECS)
}

/// Every object is written once and read exactly once at the cache
/// region, with read times spread over the first `read_window_s` seconds.
pub fn one_hit_wonder(
    base: &Region,
    cache: &Region,
    n_objects: usize,
    read_window_s: f64,
    horizon_s: f64,
    size: u64,
    seed: u64,
) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut requests = Vec::new();
    for i in 0..n_objects {
        let key = format!("once-{i:04}");
        requests.push(Request {
            t: 0.0,
            op: Op::Put,
            key: key.clone(),
            size,
            region: base.clone(),
        });
        requests.push(Request {
            t: 60.0 + rng.gen::<f64>() * read_window_s,
            op: Op::Get,
            key,
            size,
            region: cache.clone(),
        });
    }
    Trace::new(requests, horizon_s)
}
