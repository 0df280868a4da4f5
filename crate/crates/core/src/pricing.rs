//! Cloud cost model: per-region storage rates, directed network rates,
//! and break-even times.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::MONTH_SECS;

/// A cloud region label, e.g. `aws:us-east-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region(String);

impl Region {
    pub fn new(id: impl Into<String>) -> Self {
        Region(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Region {
    fn from(s: &str) -> Self {
        Region::new(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PricingError {
    #[error("malformed pricing file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate region {0:?}")]
    DuplicateRegion(String),
    #[error("empty region name")]
    EmptyRegion,
    #[error("missing storage rate for region {0:?}")]
    MissingStorage(String),
    #[error("missing network rate for {src:?} -> {dst:?}")]
    MissingNetwork { src: String, dst: String },
    #[error("negative rate for {0}")]
    NegativeRate(String),
    #[error("unknown region {0:?} referenced by {1}")]
    UnknownRegion(String, String),
    #[error("malformed network key {0:?}, expected \"src->dst\"")]
    BadNetworkKey(String),
    #[error("intra-region network rate for {0:?} may not be set in the file")]
    IntraRegionRate(String),
}

/// On-disk pricing file format.
#[derive(Debug, Serialize, Deserialize)]
struct PricingFile {
    regions: Vec<String>,
    storage: BTreeMap<String, f64>,
    network: BTreeMap<String, f64>,
    #[serde(default)]
    op_per_1000: f64,
}

/// Immutable cost model for a set of regions.
///
/// Storage rates are in USD per GB-month, network rates in USD per GB for
/// each ordered pair of distinct regions, and the operation rate in USD
/// per 1000 requests. The table is validated on load and never mutated.
#[derive(Debug, Clone)]
pub struct PricingTable {
    regions: Vec<Region>,
    storage: BTreeMap<Region, f64>,
    network: BTreeMap<(Region, Region), f64>,
    op_per_1000: f64,
}

impl PricingTable {
    /// Parses and validates a pricing file.
    ///
    /// Every region needs a storage rate and every ordered pair of distinct
    /// regions needs a network rate; a missing pair is an error, not a
    /// default. Intra-region rates are 0 by definition and may not appear
    /// in the file.
    pub fn load(mut source: impl Read) -> Result<Self, PricingError> {
        let mut buf = String::new();
        source
            .read_to_string(&mut buf)
            .map_err(|e| PricingError::Parse(serde_json::Error::io(e)))?;
        let file: PricingFile = serde_json::from_str(&buf)?;
        Self::from_file(file)
    }

    /// Builds a table directly from rate maps; used by tests and fixtures.
    pub fn from_rates(
        regions: &[&str],
        storage: &[(&str, f64)],
        network: &[(&str, &str, f64)],
    ) -> Result<Self, PricingError> {
        let file = PricingFile {
            regions: regions.iter().map(|r| r.to_string()).collect(),
            storage: storage
                .iter()
                .map(|(r, v)| (r.to_string(), *v))
                .collect(),
            network: network
                .iter()
                .map(|(s, d, v)| (format!("{s}->{d}"), *v))
                .collect(),
            op_per_1000: 0.0,
        };
        Self::from_file(file)
    }

    fn from_file(file: PricingFile) -> Result<Self, PricingError> {
        let mut regions = Vec::with_capacity(file.regions.len());
        for name in &file.regions {
            if name.is_empty() {
                return Err(PricingError::EmptyRegion);
            }
            let region = Region::new(name.clone());
            if regions.contains(&region) {
                return Err(PricingError::DuplicateRegion(name.clone()));
            }
            regions.push(region);
        }

        let mut storage = BTreeMap::new();
        for (name, rate) in &file.storage {
            let region = Region::new(name.clone());
            if !regions.contains(&region) {
                return Err(PricingError::UnknownRegion(
                    name.clone(),
                    "storage".into(),
                ));
            }
            if *rate < 0.0 || !rate.is_finite() {
                return Err(PricingError::NegativeRate(format!("storage[{name}]")));
            }
            storage.insert(region, *rate);
        }
        for region in &regions {
            if !storage.contains_key(region) {
                return Err(PricingError::MissingStorage(region.to_string()));
            }
        }

        let mut network = BTreeMap::new();
        for (key, rate) in &file.network {
            let (src, dst) = key
                .split_once("->")
                .ok_or_else(|| PricingError::BadNetworkKey(key.clone()))?;
            let src = Region::new(src);
            let dst = Region::new(dst);
            if !regions.contains(&src) {
                return Err(PricingError::UnknownRegion(src.to_string(), "network".into()));
            }
            if !regions.contains(&dst) {
                return Err(PricingError::UnknownRegion(dst.to_string(), "network".into()));
            }
            if src == dst {
                return Err(PricingError::IntraRegionRate(src.to_string()));
            }
            if *rate < 0.0 || !rate.is_finite() {
                return Err(PricingError::NegativeRate(format!("network[{key}]")));
            }
            network.insert((src, dst), *rate);
        }
        for src in &regions {
            for dst in &regions {
                if src != dst && !network.contains_key(&(src.clone(), dst.clone())) {
                    return Err(PricingError::MissingNetwork {
                        src: src.to_string(),
                        dst: dst.to_string(),
                    });
                }
            }
        }

        if file.op_per_1000 < 0.0 || !file.op_per_1000.is_finite() {
            return Err(PricingError::NegativeRate("op_per_1000".into()));
        }

        Ok(PricingTable {
            regions,
            storage,
            network,
            op_per_1000: file.op_per_1000,
        })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn contains(&self, region: &Region) -> bool {
        self.storage.contains_key(region)
    }

    /// Storage rate in USD per GB-month.
    ///
    /// Panics if the region is not in the table; callers validate regions
    /// against the table up front.
    pub fn storage_rate(&self, region: &Region) -> f64 {
        self.storage[region]
    }

    /// Network rate in USD per GB for `src -> dst`; 0 within a region.
    pub fn network_rate(&self, src: &Region, dst: &Region) -> f64 {
        if src == dst {
            return 0.0;
        }
        self.network[&(src.clone(), dst.clone())]
    }

    /// Operation rate in USD per 1000 requests.
    pub fn op_rate_per_1000(&self) -> f64 {
        self.op_per_1000
    }

    /// Break-even time in seconds for the `src -> dst` edge: the storage
    /// duration at `dst` whose cost equals one network transfer from `src`.
    ///
    /// A zero storage rate yields `f64::INFINITY`, meaning it is never
    /// economical to evict.
    pub fn break_even(&self, src: &Region, dst: &Region) -> f64 {
        debug_assert!(src != dst, "break-even is defined for distinct regions");
        let n = self.network_rate(src, dst);
        let s = self.storage_rate(dst);
        if s == 0.0 {
            if n == 0.0 {
                return 0.0;
            }
            return f64::INFINITY;
        }
        n / s * MONTH_SECS
    }

    /// Largest finite break-even over all inbound edges of `dst`.
    pub fn max_break_even_into(&self, dst: &Region) -> f64 {
        let mut max = 0.0f64;
        for src in &self.regions {
            if src == dst {
                continue;
            }
            let t = self.break_even(src, dst);
            if t.is_finite() && t > max {
                max = t;
            }
        }
        max
    }
}
