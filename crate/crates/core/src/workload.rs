//! Job generation, per-job request streams under the four access patterns,
//! and per-site access histories closed once per period.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{FileId, JobId, SiteId};

/// RNG stream reserved for job construction (origin and dataset draws).
const JOB_LAYOUT_STREAM: u64 = 1;
/// First RNG stream of the per-job request generators.
const REQUEST_STREAM_BASE: u64 = 1 << 32;

/// Seeded ChaCha generator on an independent stream.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("gaussian walk sigma must be positive (got {0})")]
    Sigma(f64),
    #[error("zipf exponent must be positive (got {0})")]
    ZipfExponent(f64),
    #[error("jobs need at least one request")]
    NoRequests,
    #[error("job universe must contain at least one file")]
    EmptyUniverse,
    #[error("dataset affinity must be in [0, 1] (got {0})")]
    Affinity(f64),
    #[error("no origin sites to run jobs on")]
    NoOrigins,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AccessPattern {
    Sequential,
    #[serde(rename = "random")]
    RandomUniform,
    #[serde(rename = "gaussian_walk")]
    RandomWalkGaussian {
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    #[serde(rename = "zipf")]
    RandomZipf {
        #[serde(default = "default_zipf_exponent")]
        exponent: f64,
    },
}

fn default_sigma() -> f64 {
    1.0
}

fn default_zipf_exponent() -> f64 {
    0.85
}

impl AccessPattern {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        match *self {
            AccessPattern::RandomWalkGaussian { sigma } if !(sigma > 0.0) => {
                Err(WorkloadError::Sigma(sigma))
            }
            AccessPattern::RandomZipf { exponent } if !(exponent > 0.0) => {
                Err(WorkloadError::ZipfExponent(exponent))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AccessPattern::Sequential => "sequential",
            AccessPattern::RandomUniform => "random",
            AccessPattern::RandomWalkGaussian { .. } => "gaussian_walk",
            AccessPattern::RandomZipf { .. } => "zipf",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: JobId,
    pub origin: SiteId,
    pub request_count: u32,
    pub pattern: AccessPattern,
    pub file_universe: Vec<FileId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginPolicy {
    #[default]
    RoundRobin,
    Random,
}

/// How a scenario's jobs are laid out over sites and files.
///
/// Files are cut into contiguous datasets of `universe_size` files; each job
/// works inside one dataset. With probability `dataset_affinity` a job picks
/// its origin's home dataset (origin position modulo dataset count),
/// otherwise a uniformly random one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub count: u32,
    /// Sites jobs run on; empty means every site.
    #[serde(default)]
    pub origins: Vec<SiteId>,
    #[serde(default)]
    pub origin_policy: OriginPolicy,
    pub requests_per_job: u32,
    pub universe_size: u32,
    #[serde(default)]
    pub dataset_affinity: f64,
    pub pattern: AccessPattern,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        self.pattern.validate()?;
        if self.requests_per_job == 0 {
            return Err(WorkloadError::NoRequests);
        }
        if self.universe_size == 0 {
            return Err(WorkloadError::EmptyUniverse);
        }
        if !(0.0..=1.0).contains(&self.dataset_affinity) {
            return Err(WorkloadError::Affinity(self.dataset_affinity));
        }
        Ok(())
    }

    pub fn generate_jobs(
        &self,
        file_count: u32,
        site_count: u32,
        seed: u64,
    ) -> Result<Vec<JobSpec>, WorkloadError> {
        self.validate()?;
        if file_count == 0 {
            return Err(WorkloadError::EmptyUniverse);
        }
        let origins: Vec<SiteId> = if self.origins.is_empty() {
            (0..site_count).map(SiteId).collect()
        } else {
            self.origins.clone()
        };
        if origins.is_empty() {
            return Err(WorkloadError::NoOrigins);
        }
        let universe = self.universe_size.min(file_count);
        let datasets = file_count.div_ceil(universe);
        let mut rng = seeded_stream(seed, JOB_LAYOUT_STREAM);
        let jobs = (0..self.count)
            .map(|j| {
                let slot = match self.origin_policy {
                    OriginPolicy::RoundRobin => j as usize % origins.len(),
                    OriginPolicy::Random => rng.random_range(0..origins.len()),
                };
                let dataset = if rng.random::<f64>() < self.dataset_affinity {
                    slot as u32 % datasets
                } else {
                    rng.random_range(0..datasets)
                };
                let start = dataset * universe;
                let end = (start + universe).min(file_count);
                JobSpec {
                    id: JobId(j),
                    origin: origins[slot],
                    request_count: self.requests_per_job,
                    pattern: self.pattern,
                    file_universe: (start..end).map(FileId).collect(),
                }
            })
            .collect();
        Ok(jobs)
    }
}

/// Per-job request stream. Deterministic for a given `(seed, job id)`.
#[derive(Clone, Debug)]
pub struct RequestGenerator {
    universe: Vec<FileId>,
    pattern: AccessPattern,
    remaining: u32,
    position: Option<usize>,
    rng: ChaCha8Rng,
    zipf: Option<WeightedIndex<f64>>,
    gauss: Option<Normal<f64>>,
}

impl RequestGenerator {
    pub fn new(job: &JobSpec, seed: u64) -> Result<Self, WorkloadError> {
        job.pattern.validate()?;
        if job.file_universe.is_empty() {
            return Err(WorkloadError::EmptyUniverse);
        }
        if job.request_count == 0 {
            return Err(WorkloadError::NoRequests);
        }
        let zipf = match job.pattern {
            AccessPattern::RandomZipf { exponent } => {
                let weights =
                    (1..=job.file_universe.len()).map(|r| 1.0 / (r as f64).powf(exponent));
                Some(WeightedIndex::new(weights).expect("rank-1 weight is always 1"))
            }
            _ => None,
        };
        let gauss = match job.pattern {
            AccessPattern::RandomWalkGaussian { sigma } => {
                Some(Normal::new(0.0, sigma).map_err(|_| WorkloadError::Sigma(sigma))?)
            }
            _ => None,
        };
        Ok(RequestGenerator {
            universe: job.file_universe.clone(),
            pattern: job.pattern,
            remaining: job.request_count,
            position: None,
            rng: seeded_stream(seed, REQUEST_STREAM_BASE + job.id.0 as u64),
            zipf,
            gauss,
        })
    }

    pub fn remaining(&self) -> u32 {
        self.remaining
    }

    /// Next requested file, or `None` once the job's requests are used up.
    pub fn next_request(&mut self) -> Option<FileId> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let n = self.universe.len();
        let index = match self.pattern {
            AccessPattern::Sequential => self.position.map_or(0, |p| (p + 1) % n),
            AccessPattern::RandomUniform => self.rng.random_range(0..n),
            AccessPattern::RandomWalkGaussian { .. } => match self.position {
                None => self.rng.random_range(0..n),
                Some(p) => {
                    let step = self.gauss.as_ref().unwrap().sample(&mut self.rng).round();
                    (p as f64 + step).clamp(0.0, (n - 1) as f64) as usize
                }
            },
            AccessPattern::RandomZipf { .. } => self.zipf.as_ref().unwrap().sample(&mut self.rng),
        };
        self.position = Some(index);
        Some(self.universe[index])
    }
}

impl Iterator for RequestGenerator {
    type Item = FileId;

    fn next(&mut self) -> Option<FileId> {
        self.next_request()
    }
}

/// Requests per `(origin site, file)` over a whole job list. Placement never
/// influences which files are requested, so this is exact for any run.
pub fn demand_matrix(
    jobs: &[JobSpec],
    seed: u64,
) -> Result<BTreeMap<(SiteId, FileId), u64>, WorkloadError> {
    let mut demand = BTreeMap::new();
    for job in jobs {
        for file in RequestGenerator::new(job, seed)? {
            *demand.entry((job.origin, file)).or_insert(0) += 1;
        }
    }
    Ok(demand)
}

/// Frozen job x file request counts of one site for one period.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AccessHistory {
    site: SiteId,
    period: u32,
    jobs: Vec<JobId>,
    counts: BTreeMap<(JobId, FileId), u32>,
}

impl AccessHistory {
    /// Builds a history directly from `(job, file, count)` cells; jobs
    /// listed in `jobs` with no cells are kept as empty rows.
    pub fn from_counts(
        site: SiteId,
        period: u32,
        jobs: impl IntoIterator<Item = JobId>,
        cells: impl IntoIterator<Item = (JobId, FileId, u32)>,
    ) -> Self {
        let mut set: BTreeSet<JobId> = jobs.into_iter().collect();
        let mut counts = BTreeMap::new();
        for (job, file, count) in cells {
            set.insert(job);
            if count > 0 {
                *counts.entry((job, file)).or_insert(0) += count;
            }
        }
        AccessHistory {
            site,
            period,
            jobs: set.into_iter().collect(),
            counts,
        }
    }

    pub fn site(&self) -> SiteId {
        self.site
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    /// Jobs executed at the site in the period, ascending.
    pub fn jobs(&self) -> &[JobId] {
        &self.jobs
    }

    /// Files requested at least once, ascending.
    pub fn files(&self) -> Vec<FileId> {
        let set: BTreeSet<FileId> = self.counts.keys().map(|&(_, f)| f).collect();
        set.into_iter().collect()
    }

    pub fn count(&self, job: JobId, file: FileId) -> u32 {
        self.counts.get(&(job, file)).copied().unwrap_or(0)
    }

    /// Non-zero cells as `((job, file), count)`.
    pub fn cells(&self) -> impl Iterator<Item = (JobId, FileId, u32)> + '_ {
        self.counts.iter().map(|(&(j, f), &c)| (j, f, c))
    }

    /// Site-level request count for a file: the sum over jobs.
    pub fn site_requests(&self, file: FileId) -> u64 {
        self.counts
            .iter()
            .filter(|(&(_, f), _)| f == file)
            .map(|(_, &c)| c as u64)
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    /// Cell-wise sum of several histories of the same site.
    pub fn merged<'a>(
        site: SiteId,
        histories: impl IntoIterator<Item = &'a AccessHistory>,
    ) -> Self {
        let mut period = 0;
        let mut jobs = Vec::new();
        let mut cells = Vec::new();
        for h in histories {
            period = period.max(h.period);
            jobs.extend_from_slice(&h.jobs);
            cells.extend(h.cells());
        }
        AccessHistory::from_counts(site, period, jobs, cells)
    }
}

/// Mutable per-site recorder for the open period.
#[derive(Clone, Debug)]
pub struct HistoryRecorder {
    open: AccessHistory,
}

impl HistoryRecorder {
    pub fn new(site: SiteId) -> Self {
        HistoryRecorder {
            open: AccessHistory {
                site,
                ..AccessHistory::default()
            },
        }
    }

    pub fn period(&self) -> u32 {
        self.open.period
    }

    /// Registers a job as executed here even if it ends up requesting nothing.
    pub fn start_job(&mut self, job: JobId) {
        if let Err(pos) = self.open.jobs.binary_search(&job) {
            self.open.jobs.insert(pos, job);
        }
    }

    pub fn record_access(&mut self, job: JobId, file: FileId) {
        self.start_job(job);
        *self.open.counts.entry((job, file)).or_insert(0) += 1;
    }

    /// Freezes the open period and starts the next, empty one.
    pub fn close_period(&mut self) -> AccessHistory {
        let next = AccessHistory {
            site: self.open.site,
            period: self.open.period + 1,
            ..AccessHistory::default()
        };
        std::mem::replace(&mut self.open, next)
    }
}
