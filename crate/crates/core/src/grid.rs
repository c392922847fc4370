//! Static and dynamic grid state: sites, bandwidth, files, replica placement
//! and per-site availability statistics.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used when comparing accumulated MB figures.
const STORAGE_EPSILON: f64 = 1e-9;

macro_rules! ordinal_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

ordinal_id!(
    /// Dense site identifier, `0..site_count`.
    SiteId,
    "S"
);
ordinal_id!(
    /// Dense file identifier, `0..file_count`.
    FileId,
    "F"
);
ordinal_id!(
    /// Dense job identifier in submission order.
    JobId,
    "J"
);

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("bandwidth matrix is {rows}x{cols}, expected {expected}x{expected}")]
    BandwidthShape {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("bandwidth between {a} and {b} must be positive and finite (got {value})")]
    BandwidthValue { a: SiteId, b: SiteId, value: f64 },
    #[error("bandwidth matrix is not symmetric at ({a}, {b}): {ab} != {ba}")]
    BandwidthAsymmetric {
        a: SiteId,
        b: SiteId,
        ab: f64,
        ba: f64,
    },
    #[error("site {site}: capacity must be positive (got {capacity})")]
    Capacity { site: SiteId, capacity: f64 },
    #[error("site {site}: failure profile must be in [0, 1) (got {profile})")]
    FailureProfile { site: SiteId, profile: f64 },
    #[error("file {file}: size must be positive (got {size})")]
    FileSize { file: FileId, size: f64 },
    #[error("unknown site {0}")]
    UnknownSite(SiteId),
    #[error("unknown file {0}")]
    UnknownFile(FileId),
    #[error("site {site} already holds {file}")]
    AlreadyHeld { file: FileId, site: SiteId },
    #[error("site {site} does not hold {file}")]
    NotHeld { file: FileId, site: SiteId },
    #[error("site {site} has {free:.3} MB free, {file} needs {needed:.3} MB")]
    InsufficientSpace {
        file: FileId,
        site: SiteId,
        free: f64,
        needed: f64,
    },
    #[error("refusing to delete the master replica of {file} at {site}")]
    MasterReplica { file: FileId, site: SiteId },
    #[error("refusing to delete the last replica of {file}")]
    LastReplica { file: FileId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub id: SiteId,
    pub capacity_mb: f64,
    /// Probability that an incoming request observes the site as failed.
    pub failure_profile: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileSpec {
    pub id: FileId,
    pub size_mb: f64,
}

/// Sites plus a symmetric, contention-free bandwidth matrix in MB/s.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTopology {
    sites: Vec<SiteSpec>,
    bandwidth: Vec<f64>,
}

impl GridTopology {
    /// Builds a topology from a full matrix. Diagonal entries are ignored.
    pub fn new(sites: Vec<SiteSpec>, bandwidth: Vec<Vec<f64>>) -> Result<Self, GridError> {
        let n = sites.len();
        for (i, site) in sites.iter().enumerate() {
            debug_assert_eq!(site.id.index(), i);
            if !(site.capacity_mb > 0.0) || !site.capacity_mb.is_finite() {
                return Err(GridError::Capacity {
                    site: site.id,
                    capacity: site.capacity_mb,
                });
            }
            if !(0.0..1.0).contains(&site.failure_profile) {
                return Err(GridError::FailureProfile {
                    site: site.id,
                    profile: site.failure_profile,
                });
            }
        }
        if bandwidth.len() != n || bandwidth.iter().any(|row| row.len() != n) {
            return Err(GridError::BandwidthShape {
                rows: bandwidth.len(),
                cols: bandwidth.first().map_or(0, Vec::len),
                expected: n,
            });
        }
        let mut flat = vec![f64::INFINITY; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (a, b) = (SiteId(i as u32), SiteId(j as u32));
                let value = bandwidth[i][j];
                if !(value > 0.0) || !value.is_finite() {
                    return Err(GridError::BandwidthValue { a, b, value });
                }
                if value != bandwidth[j][i] {
                    return Err(GridError::BandwidthAsymmetric {
                        a,
                        b,
                        ab: value,
                        ba: bandwidth[j][i],
                    });
                }
                flat[i * n + j] = value;
            }
        }
        Ok(GridTopology {
            sites,
            bandwidth: flat,
        })
    }

    /// Every pair of distinct sites connected at `mb_per_s`.
    pub fn uniform(sites: Vec<SiteSpec>, mb_per_s: f64) -> Result<Self, GridError> {
        let n = sites.len();
        GridTopology::new(sites, vec![vec![mb_per_s; n]; n])
    }

    pub fn sites(&self) -> &[SiteSpec] {
        &self.sites
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn site_ids(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.sites.iter().map(|s| s.id)
    }

    pub fn site(&self, id: SiteId) -> Result<&SiteSpec, GridError> {
        self.sites.get(id.index()).ok_or(GridError::UnknownSite(id))
    }

    pub fn capacity(&self, id: SiteId) -> f64 {
        self.sites[id.index()].capacity_mb
    }

    /// MB/s between two sites; infinite for a site with itself.
    pub fn bandwidth(&self, a: SiteId, b: SiteId) -> f64 {
        self.bandwidth[a.index() * self.sites.len() + b.index()]
    }

    /// Transfer time in milliseconds; zero for local transfers.
    pub fn transfer_ms(&self, size_mb: f64, from: SiteId, to: SiteId) -> f64 {
        if from == to {
            0.0
        } else {
            size_mb / self.bandwidth(from, to) * 1000.0
        }
    }

    /// Full matrix with zeros on the diagonal, for serialization.
    pub fn bandwidth_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.sites.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            self.bandwidth[i * n + j]
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Observed request and failure counts for one site.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteStats {
    pub site_requests: u64,
    pub failures: u64,
}

impl SiteStats {
    pub fn availability(&self) -> f64 {
        availability(*self)
    }
}

/// `1 - failures / requests`; an unobserved site counts as fully available.
pub fn availability(stats: SiteStats) -> f64 {
    if stats.site_requests == 0 {
        1.0
    } else {
        1.0 - stats.failures as f64 / stats.site_requests as f64
    }
}

/// Which sites hold which files, and where each master copy lives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplicaCatalog {
    holders: Vec<BTreeSet<SiteId>>,
    masters: Vec<SiteId>,
}

impl ReplicaCatalog {
    pub fn holders(&self, file: FileId) -> Result<&BTreeSet<SiteId>, GridError> {
        self.holders
            .get(file.index())
            .ok_or(GridError::UnknownFile(file))
    }

    pub fn master(&self, file: FileId) -> Result<SiteId, GridError> {
        self.masters
            .get(file.index())
            .copied()
            .ok_or(GridError::UnknownFile(file))
    }

    pub fn is_master(&self, file: FileId, site: SiteId) -> bool {
        self.masters.get(file.index()) == Some(&site)
    }

    pub fn holds(&self, file: FileId, site: SiteId) -> bool {
        self.holders
            .get(file.index())
            .is_some_and(|h| h.contains(&site))
    }

    pub fn file_count(&self) -> usize {
        self.holders.len()
    }

    /// All `(file, holder)` pairs in file-then-site order.
    pub fn replicas(&self) -> impl Iterator<Item = (FileId, SiteId)> + '_ {
        self.holders
            .iter()
            .enumerate()
            .flat_map(|(f, sites)| sites.iter().map(move |&s| (FileId(f as u32), s)))
    }

    pub fn files_at(&self, site: SiteId) -> impl Iterator<Item = FileId> + '_ {
        self.holders
            .iter()
            .enumerate()
            .filter(move |(_, sites)| sites.contains(&site))
            .map(|(f, _)| FileId(f as u32))
    }

    /// Holders other than `requester`, by descending bandwidth to the
    /// requester, ties broken by smaller site id.
    pub fn ranked_remote_holders(
        &self,
        file: FileId,
        requester: SiteId,
        topology: &GridTopology,
    ) -> Result<Vec<SiteId>, GridError> {
        let mut ranked: Vec<SiteId> = self
            .holders(file)?
            .iter()
            .copied()
            .filter(|&s| s != requester)
            .collect();
        ranked.sort_by(|&a, &b| {
            topology
                .bandwidth(requester, b)
                .total_cmp(&topology.bandwidth(requester, a))
                .then(a.cmp(&b))
        });
        Ok(ranked)
    }
}

/// Returns the holder reachable fastest from `requester`; a local copy wins.
pub fn best_replica_site(
    file: FileId,
    requester: SiteId,
    catalog: &ReplicaCatalog,
    topology: &GridTopology,
) -> Result<SiteId, GridError> {
    if catalog.holders(file)?.contains(&requester) {
        return Ok(requester);
    }
    catalog
        .ranked_remote_holders(file, requester, topology)?
        .first()
        .copied()
        .ok_or(GridError::UnknownFile(file))
}

/// Per-site MB in use. `free = capacity - used`.
#[derive(Clone, Debug, PartialEq)]
pub struct StorageState {
    capacity: Vec<f64>,
    used: Vec<f64>,
}

impl StorageState {
    pub fn used(&self, site: SiteId) -> f64 {
        self.used[site.index()]
    }

    pub fn free(&self, site: SiteId) -> f64 {
        (self.capacity[site.index()] - self.used[site.index()]).max(0.0)
    }

    pub fn capacity(&self, site: SiteId) -> f64 {
        self.capacity[site.index()]
    }

    /// Mean over sites of the used fraction, as a percentage.
    pub fn fill_pct(&self) -> f64 {
        if self.capacity.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .used
            .iter()
            .zip(&self.capacity)
            .map(|(u, c)| u / c)
            .sum();
        total / self.capacity.len() as f64 * 100.0
    }
}

/// Files, catalog and storage kept consistent by `place_replica` and
/// `delete_replica`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    files: Vec<FileSpec>,
    catalog: ReplicaCatalog,
    storage: StorageState,
}

impl GridState {
    /// One master per file; `masters[i]` holds file `i`.
    pub fn new(
        topology: &GridTopology,
        files: Vec<FileSpec>,
        masters: &[SiteId],
    ) -> Result<Self, GridError> {
        let n_sites = topology.site_count();
        for (i, file) in files.iter().enumerate() {
            debug_assert_eq!(file.id.index(), i);
            if !(file.size_mb > 0.0) || !file.size_mb.is_finite() {
                return Err(GridError::FileSize {
                    file: file.id,
                    size: file.size_mb,
                });
            }
        }
        assert_eq!(files.len(), masters.len(), "one master site per file");
        let mut state = GridState {
            catalog: ReplicaCatalog {
                holders: vec![BTreeSet::new(); files.len()],
                masters: masters.to_vec(),
            },
            storage: StorageState {
                capacity: topology.sites().iter().map(|s| s.capacity_mb).collect(),
                used: vec![0.0; n_sites],
            },
            files,
        };
        for (i, &site) in masters.iter().enumerate() {
            state.place_replica(FileId(i as u32), site)?;
        }
        Ok(state)
    }

    pub fn files(&self) -> &[FileSpec] {
        &self.files
    }

    pub fn catalog(&self) -> &ReplicaCatalog {
        &self.catalog
    }

    pub fn storage(&self) -> &StorageState {
        &self.storage
    }

    pub fn size(&self, file: FileId) -> f64 {
        self.files[file.index()].size_mb
    }

    pub fn holds(&self, file: FileId, site: SiteId) -> bool {
        self.catalog.holds(file, site)
    }

    pub fn free(&self, site: SiteId) -> f64 {
        self.storage.free(site)
    }

    /// Fits `needed` MB at `site` (with float slack).
    pub fn fits(&self, site: SiteId, needed: f64) -> bool {
        needed <= self.free(site) + STORAGE_EPSILON
    }

    pub fn place_replica(&mut self, file: FileId, site: SiteId) -> Result<(), GridError> {
        let size = self
            .files
            .get(file.index())
            .ok_or(GridError::UnknownFile(file))?
            .size_mb;
        if site.index() >= self.storage.capacity.len() {
            return Err(GridError::UnknownSite(site));
        }
        if self.catalog.holders[file.index()].contains(&site) {
            return Err(GridError::AlreadyHeld { file, site });
        }
        if !self.fits(site, size) {
            return Err(GridError::InsufficientSpace {
                file,
                site,
                free: self.free(site),
                needed: size,
            });
        }
        self.catalog.holders[file.index()].insert(site);
        self.storage.used[site.index()] += size;
        Ok(())
    }

    pub fn delete_replica(&mut self, file: FileId, site: SiteId) -> Result<(), GridError> {
        let holders = self
            .catalog
            .holders
            .get(file.index())
            .ok_or(GridError::UnknownFile(file))?;
        if !holders.contains(&site) {
            return Err(GridError::NotHeld { file, site });
        }
        if self.catalog.masters[file.index()] == site {
            return Err(GridError::MasterReplica { file, site });
        }
        if holders.len() == 1 {
            return Err(GridError::LastReplica { file });
        }
        self.catalog.holders[file.index()].remove(&site);
        let used = &mut self.storage.used[site.index()];
        *used = (*used - self.files[file.index()].size_mb).max(0.0);
        Ok(())
    }

    /// Recomputes usage from the catalog; used by invariant checks.
    pub fn recomputed_used(&self, site: SiteId) -> f64 {
        self.catalog
            .files_at(site)
            .map(|f| self.files[f.index()].size_mb)
            .sum()
    }
}
