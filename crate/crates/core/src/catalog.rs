//! Control-plane state: virtual buckets and objects, versions, per-region
//! replica lifecycle, read-source selection, and TTL eviction sweeps.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::pricing::{PricingTable, Region};

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("object {bucket}/{key} not found")]
    NotFound { bucket: String, key: String },
    #[error("object {bucket}/{key} was deleted at t={t}")]
    Deleted { bucket: String, key: String, t: f64 },
    #[error("object {bucket}/{key} has no committed replica")]
    ObjectLost { bucket: String, key: String },
    #[error("unknown version {version} of {bucket}/{key}")]
    UnknownVersion {
        bucket: String,
        key: String,
        version: u64,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Replica placement mode: pinned base region vs. free placement with a
/// minimum copy count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fb,
    Fp { k: usize },
}

impl Mode {
    pub fn min_copies(&self) -> usize {
        match self {
            Mode::Fb => 1,
            Mode::Fp { k } => *k,
        }
    }

    pub fn as_str(&self) -> String {
        match self {
            Mode::Fb => "fb".to_string(),
            Mode::Fp { k } => format!("fp:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consistency {
    ReadAfterWrite,
    Eventual,
}

impl Consistency {
    pub fn as_str(&self) -> &'static str {
        match self {
            Consistency::ReadAfterWrite => "read_after_write",
            Consistency::Eventual => "eventual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplicaStatus {
    Pending,
    Committed,
    Evicted,
}

/// One physical copy of a version in a region.
#[derive(Debug, Clone)]
pub struct Replica {
    pub region: Region,
    pub status: ReplicaStatus,
    pub stored_since: f64,
    pub last_access: f64,
    pub ttl: f64,
    pub is_base: bool,
    pub evicted_at: Option<f64>,
}

impl Replica {
    fn new(region: Region, t: f64, ttl: f64, is_base: bool) -> Self {
        Replica {
            region,
            status: ReplicaStatus::Pending,
            stored_since: t,
            last_access: t,
            ttl,
            is_base,
            evicted_at: None,
        }
    }

    fn commit(&mut self) {
        assert_eq!(self.status, ReplicaStatus::Pending, "status never regresses");
        self.status = ReplicaStatus::Committed;
    }

    fn evict(&mut self, t: f64) {
        assert_eq!(self.status, ReplicaStatus::Committed, "status never regresses");
        self.status = ReplicaStatus::Evicted;
        self.evicted_at = Some(t);
    }

    pub fn is_committed(&self) -> bool {
        self.status == ReplicaStatus::Committed
    }

    /// When this replica stops being accessible if never touched again:
    /// `last_access + ttl`, infinite for base or non-expiring replicas.
    pub fn expiry(&self) -> f64 {
        if self.is_base || self.ttl.is_infinite() {
            f64::INFINITY
        } else {
            self.last_access + self.ttl
        }
    }

    /// Conservative deadline used by the multi-region TTL stale filter:
    /// `stored_since + ttl`, infinite for base or non-expiring replicas.
    pub fn eviction_deadline(&self) -> f64 {
        if self.is_base || self.ttl.is_infinite() {
            f64::INFINITY
        } else {
            self.stored_since + self.ttl
        }
    }
}

#[derive(Debug, Clone)]
pub struct Version {
    pub id: u64,
    pub size: u64,
    pub created_at: f64,
    pub replicas: Vec<Replica>,
}

impl Version {
    pub fn committed_count(&self) -> usize {
        self.replicas.iter().filter(|r| r.is_committed()).count()
    }

    pub fn committed_in(&self, region: &Region) -> Option<&Replica> {
        self.replicas
            .iter()
            .find(|r| r.is_committed() && &r.region == region)
    }

    fn committed_in_mut(&mut self, region: &Region) -> Option<&mut Replica> {
        self.replicas
            .iter_mut()
            .find(|r| r.is_committed() && &r.region == region)
    }
}

#[derive(Debug, Clone)]
pub struct VirtualObject {
    pub bucket: String,
    pub key: String,
    pub versions: Vec<Version>,
    pub deleted_at: Option<f64>,
    /// Time of the most recent eviction sweep over this object; used to
    /// decide whether an expired replica sat protected since then.
    last_sweep: f64,
}

/// A closed storage interval, emitted whenever a replica stops being
/// stored. The simulator turns these into ledger charges.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedInterval {
    pub region: Region,
    pub bytes: u64,
    pub start: f64,
    pub end: f64,
    pub is_base: bool,
}

/// Where a read is served from.
#[derive(Debug, Clone, PartialEq)]
pub enum ReadPlan {
    Local { version: u64, size: u64 },
    Remote { version: u64, size: u64, source: Region },
}

/// Regions other than `reader` currently holding the located version,
/// with their conservative eviction deadlines.
pub type Holders = Vec<(Region, f64)>;

/// Virtual bucket/object namespace with per-region replica lifecycle.
#[derive(Debug)]
pub struct Catalog {
    mode: Mode,
    /// False switches PUT to last-writer-wins: prior versions lose their
    /// replicas at write time.
    versioning: bool,
    objects: BTreeMap<(String, String), VirtualObject>,
}

impl Catalog {
    pub fn new(mode: Mode, versioning: bool) -> Self {
        Catalog {
            mode,
            versioning,
            objects: BTreeMap::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn object(&self, bucket: &str, key: &str) -> Option<&VirtualObject> {
        self.objects.get(&(bucket.to_string(), key.to_string()))
    }

    pub fn objects(&self) -> impl Iterator<Item = &VirtualObject> {
        self.objects.values()
    }

    /// Write-local PUT. Appends a version with one committed replica at
    /// `region`; the first version's replica is the base in FB mode. In
    /// last-writer-wins mode all prior versions lose their replicas at `t`
    /// and the closed intervals are returned.
    pub fn put(
        &mut self,
        bucket: &str,
        key: &str,
        size: u64,
        region: &Region,
        t: f64,
    ) -> (u64, Vec<ClosedInterval>) {
        let entry = self
            .objects
            .entry((bucket.to_string(), key.to_string()))
            .or_insert_with(|| VirtualObject {
                bucket: bucket.to_string(),
                key: key.to_string(),
                versions: Vec::new(),
                deleted_at: None,
                last_sweep: t,
            });
        // A PUT revives a previously deleted key.
        entry.deleted_at = None;

        let mut closed = Vec::new();
        if !self.versioning {
            for version in &mut entry.versions {
                for replica in &mut version.replicas {
                    if replica.is_committed() {
                        replica.evict(t);
                        closed.push(ClosedInterval {
                            region: replica.region.clone(),
                            bytes: version.size,
                            start: replica.stored_since,
                            end: t,
                            is_base: replica.is_base,
                        });
                    }
                }
            }
        }

        let id = entry.versions.last().map(|v| v.id + 1).unwrap_or(1);
        let is_base = self.mode == Mode::Fb && entry.versions.is_empty();
        let mut replica = Replica::new(region.clone(), t, f64::INFINITY, is_base);
        replica.commit();
        entry.versions.push(Version {
            id,
            size,
            created_at: t,
            replicas: vec![replica],
        });
        (id, closed)
    }

    /// Resolves a read to a local hit or the cheapest remote source.
    pub fn locate(
        &self,
        bucket: &str,
        key: &str,
        reader: &Region,
        consistency: Consistency,
        pricing: &PricingTable,
    ) -> Result<ReadPlan, CatalogError> {
        let obj = self.object(bucket, key).ok_or_else(|| CatalogError::NotFound {
            bucket: bucket.to_string(),
            key: key.to_string(),
        })?;
        if let Some(t) = obj.deleted_at {
            return Err(CatalogError::Deleted {
                bucket: bucket.to_string(),
                key: key.to_string(),
                t,
            });
        }
        let latest = obj.versions.last().ok_or_else(|| CatalogError::NotFound {
            bucket: bucket.to_string(),
            key: key.to_string(),
        })?;

        // Under eventual consistency a committed local replica of any
        // version serves the read, even when a newer version exists
        // elsewhere. Prefer the newest local version.
        if consistency == Consistency::Eventual {
            for version in obj.versions.iter().rev() {
                if version.committed_in(reader).is_some() {
                    return Ok(ReadPlan::Local {
                        version: version.id,
                        size: version.size,
                    });
                }
            }
        } else if latest.committed_in(reader).is_some() {
            return Ok(ReadPlan::Local {
                version: latest.id,
                size: latest.size,
            });
        }

        // Remote: cheapest inbound rate among the latest version's
        // committed replicas, ties broken by region id.
        let mut best: Option<(&Replica, f64)> = None;
        for replica in latest.replicas.iter().filter(|r| r.is_committed()) {
            let rate = pricing.network_rate(&replica.region, reader);
            best = match best {
                None => Some((replica, rate)),
                Some((cur, cur_rate)) => {
                    if rate < cur_rate || (rate == cur_rate && replica.region < cur.region) {
                        Some((replica, rate))
                    } else {
                        Some((cur, cur_rate))
                    }
                }
            };
        }
        match best {
            Some((replica, _)) => Ok(ReadPlan::Remote {
                version: latest.id,
                size: latest.size,
                source: replica.region.clone(),
            }),
            None => Err(CatalogError::ObjectLost {
                bucket: bucket.to_string(),
                key: key.to_string(),
            }),
        }
    }

    /// Other regions holding a committed replica of `version`, with their
    /// conservative eviction deadlines; input to the multi-region TTL
    /// assignment.
    pub fn holders(&self, bucket: &str, key: &str, version: u64, exclude: &Region) -> Holders {
        let mut out = Vec::new();
        if let Some(obj) = self.object(bucket, key) {
            if let Some(v) = obj.versions.iter().find(|v| v.id == version) {
                for r in v.replicas.iter().filter(|r| r.is_committed()) {
                    if &r.region != exclude {
                        out.push((r.region.clone(), r.eviction_deadline()));
                    }
                }
            }
        }
        out
    }

    /// Creates a committed replica after a remote read. Admitting where a
    /// committed replica already exists is an idempotent no-op; returns
    /// whether a replica was actually created.
    pub fn admit_replica(
        &mut self,
        bucket: &str,
        key: &str,
        version: u64,
        region: &Region,
        t: f64,
        ttl: f64,
    ) -> Result<bool, CatalogError> {
        let obj = self
            .objects
            .get_mut(&(bucket.to_string(), key.to_string()))
            .ok_or_else(|| CatalogError::NotFound {
                bucket: bucket.to_string(),
                key: key.to_string(),
            })?;
        let v = obj
            .versions
            .iter_mut()
            .find(|v| v.id == version)
            .ok_or_else(|| CatalogError::UnknownVersion {
                bucket: bucket.to_string(),
                key: key.to_string(),
                version,
            })?;
        if v.committed_in(region).is_some() {
            return Ok(false);
        }
        // Two-phase commit collapses to an immediate commit here; the
        // pending state still exists so the lifecycle order is exercised.
        let mut replica = Replica::new(region.clone(), t, ttl, false);
        replica.commit();
        v.replicas.push(replica);
        Ok(true)
    }

    /// Resets a replica's access clock after a local hit, optionally
    /// installing a new TTL value.
    pub fn record_hit(
        &mut self,
        bucket: &str,
        key: &str,
        version: u64,
        region: &Region,
        t: f64,
        new_ttl: Option<f64>,
    ) {
        if let Some(obj) = self.objects.get_mut(&(bucket.to_string(), key.to_string())) {
            if let Some(v) = obj.versions.iter_mut().find(|v| v.id == version) {
                if let Some(r) = v.committed_in_mut(region) {
                    debug_assert!(t >= r.stored_since);
                    r.last_access = t;
                    if let Some(ttl) = new_ttl {
                        r.ttl = ttl;
                    }
                }
            }
        }
    }

    /// Evicts a specific replica right now (policy-driven, e.g. the
    /// clairvoyant drop-after-read). Protection still applies: the sole
    /// copy, the FP quorum, and FB base replicas are kept.
    pub fn evict_replica_now(
        &mut self,
        bucket: &str,
        key: &str,
        version: u64,
        region: &Region,
        t: f64,
    ) -> Option<ClosedInterval> {
        let min_copies = self.mode.min_copies();
        let obj = self.objects.get_mut(&(bucket.to_string(), key.to_string()))?;
        let latest = obj.versions.last().map(|v| v.id);
        let v = obj.versions.iter_mut().find(|v| v.id == version)?;
        let protected_count = latest == Some(version) && v.committed_count() <= min_copies;
        let size = v.size;
        let r = v.committed_in_mut(region)?;
        if r.is_base || protected_count {
            return None;
        }
        let interval = ClosedInterval {
            region: r.region.clone(),
            bytes: size,
            start: r.stored_since,
            end: t,
            is_base: r.is_base,
        };
        r.evict(t);
        Some(interval)
    }

    /// Ends storage for every replica of every version at `t`.
    pub fn delete(&mut self, bucket: &str, key: &str, t: f64) -> Option<Vec<ClosedInterval>> {
        let obj = self.objects.get_mut(&(bucket.to_string(), key.to_string()))?;
        if obj.deleted_at.is_some() {
            return None;
        }
        let mut closed = Vec::new();
        for version in &mut obj.versions {
            for replica in &mut version.replicas {
                if replica.is_committed() {
                    replica.evict(t);
                    closed.push(ClosedInterval {
                        region: replica.region.clone(),
                        bytes: version.size,
                        start: replica.stored_since,
                        end: t,
                        is_base: replica.is_base,
                    });
                }
            }
        }
        obj.deleted_at = Some(t);
        Some(closed)
    }

    /// TTL sweep over one object. In `exact` mode evictions are backdated
    /// to `last_access + ttl` unless the replica survived that moment only
    /// through protection, in which case it is charged until now. In
    /// periodic mode (`exact = false`) evictions take effect at the scan
    /// tick.
    pub fn sweep_object(
        &mut self,
        bucket: &str,
        key: &str,
        now: f64,
        pricing: &PricingTable,
        exact: bool,
    ) -> Vec<ClosedInterval> {
        let min_copies = self.mode.min_copies();
        let Some(obj) = self.objects.get_mut(&(bucket.to_string(), key.to_string())) else {
            return Vec::new();
        };
        let out = sweep_one(obj, now, pricing, exact, min_copies);
        obj.last_sweep = now;
        out
    }

    /// TTL sweep over the whole namespace (periodic scan tick or the final
    /// horizon sweep).
    pub fn sweep_all(&mut self, now: f64, pricing: &PricingTable, exact: bool) -> Vec<ClosedInterval> {
        let min_copies = self.mode.min_copies();
        let mut closed = Vec::new();
        for obj in self.objects.values_mut() {
            closed.extend(sweep_one(obj, now, pricing, exact, min_copies));
            obj.last_sweep = now;
        }
        closed
    }

    /// Closes the storage interval of every surviving committed replica at
    /// the trace horizon. The catalog is left in its final state; replicas
    /// are not marked evicted.
    pub fn close_survivors(&self, horizon: f64) -> Vec<ClosedInterval> {
        let mut out = Vec::new();
        for obj in self.objects.values() {
            for version in &obj.versions {
                for replica in &version.replicas {
                    if replica.is_committed() {
                        out.push(ClosedInterval {
                            region: replica.region.clone(),
                            bytes: version.size,
                            start: replica.stored_since,
                            end: horizon.max(replica.stored_since),
                            is_base: replica.is_base,
                        });
                    }
                }
            }
        }
        out
    }

    /// Writes one JSON object per line with versions and replica states.
    pub fn dump_jsonl(&self, mut sink: impl Write) -> Result<(), CatalogError> {
        #[derive(Serialize)]
        struct ReplicaDump<'a> {
            region: &'a str,
            status: ReplicaStatus,
            stored_since: f64,
            last_access: f64,
            ttl: Option<f64>,
            is_base: bool,
            evicted_at: Option<f64>,
        }
        #[derive(Serialize)]
        struct VersionDump<'a> {
            id: u64,
            size: u64,
            created_at: f64,
            replicas: Vec<ReplicaDump<'a>>,
        }
        #[derive(Serialize)]
        struct ObjectDump<'a> {
            bucket: &'a str,
            key: &'a str,
            deleted_at: Option<f64>,
            versions: Vec<VersionDump<'a>>,
        }
        for obj in self.objects.values() {
            let dump = ObjectDump {
                bucket: &obj.bucket,
                key: &obj.key,
                deleted_at: obj.deleted_at,
                versions: obj
                    .versions
                    .iter()
                    .map(|v| VersionDump {
                        id: v.id,
                        size: v.size,
                        created_at: v.created_at,
                        replicas: v
                            .replicas
                            .iter()
                            .map(|r| ReplicaDump {
                                region: r.region.as_str(),
                                status: r.status,
                                stored_since: r.stored_since,
                                last_access: r.last_access,
                                ttl: r.ttl.is_finite().then_some(r.ttl),
                                is_base: r.is_base,
                                evicted_at: r.evicted_at,
                            })
                            .collect(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut sink, &dump)?;
            sink.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn sweep_one(
    obj: &mut VirtualObject,
    now: f64,
    pricing: &PricingTable,
    exact: bool,
    min_copies: usize,
) -> Vec<ClosedInterval> {
    let mut closed = Vec::new();
    if obj.deleted_at.is_some() {
        return closed;
    }
    let latest = obj.versions.last().map(|v| v.id);
    for version in &mut obj.versions {
        // The quorum rule protects the live version; superseded versions
        // are garbage-collected freely by the same TTL machinery.
        let protected_version = latest == Some(version.id);

        // Expired, evictable candidates in expiry order, so a replica that
        // only expired while another one was still alive is handled after
        // the one whose expiry freed it.
        let mut expired: Vec<usize> = version
            .replicas
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_committed() && !r.is_base && r.expiry() < now)
            .map(|(i, _)| i)
            .collect();
        expired.sort_by(|&a, &b| {
            let ra = &version.replicas[a];
            let rb = &version.replicas[b];
            ra.expiry()
                .total_cmp(&rb.expiry())
                .then_with(|| {
                    pricing
                        .storage_rate(&ra.region)
                        .total_cmp(&pricing.storage_rate(&rb.region))
                        .reverse()
                })
                .then_with(|| ra.region.cmp(&rb.region).reverse())
        });
        // Within an equal-expiry group the costliest regions sort first,
        // so the cheapest-storage replicas are the ones left standing when
        // the quorum stops further evictions (ties by region id).

        for idx in expired {
            if protected_version && version.committed_count() <= min_copies {
                break;
            }
            let size = version.size;
            let replica = &mut version.replicas[idx];
            if !replica.is_committed() {
                continue;
            }
            let expiry = replica.expiry();
            let end = if !exact {
                now
            } else if expiry > obj.last_sweep {
                // It expired since the previous sweep, unprotected the
                // whole time: backdate to the exact expiry.
                expiry
            } else {
                // It outlived its expiry only because protection held it;
                // charge it until the event that lifted the protection.
                now
            };
            replica.evict(end);
            closed.push(ClosedInterval {
                region: replica.region.clone(),
                bytes: size,
                start: replica.stored_since,
                end,
                is_base: replica.is_base,
            });
        }
    }
    closed
}
