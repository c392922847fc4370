//! Scenario files: a TOML description of topology, files, initial replica
//! distribution, workload and strategy, plus the code that turns one into a
//! runnable simulation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{Engine, EngineError, SimulationInput, SimulationOutput};
use crate::grid::{FileId, FileSpec, GridError, GridState, GridTopology, SiteId, SiteSpec};
use crate::metrics::{MetricReport, MetricsError};
use crate::strategies::{RscpParams, StrategyKind};
use crate::workload::{JobSpec, WorkloadError, WorkloadSpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GRIDREP_OUT_DIR";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("bad parameter override {0:?}: expected key=value")]
    BadOverride(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("jobs: {0}")]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteOverride {
    pub site: SiteId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_mb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_profile: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkOverride {
    pub a: SiteId,
    pub b: SiteId,
    pub mb_per_s: f64,
}

/// Sites and links. Bandwidth is either a full matrix or a uniform default
/// with per-link overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub site_count: u32,
    pub capacity_mb: f64,
    #[serde(default)]
    pub failure_profile: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_mb_per_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub site_overrides: Vec<SiteOverride>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bandwidth_overrides: Vec<LinkOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_matrix: Option<Vec<Vec<f64>>>,
}

fn default_bandwidth() -> f64 {
    10.0
}

/// Master files. Masters go to `master_sites` round-robin; empty means every
/// site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesConfig {
    pub count: u32,
    #[serde(default = "default_file_size")]
    pub size_mb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes_mb: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub master_sites: Vec<SiteId>,
}

fn default_file_size() -> f64 {
    100.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaPlacement {
    pub file: FileId,
    pub sites: Vec<SiteId>,
}

/// Replicas present before the run, on top of the masters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    #[serde(default)]
    pub replicas: Vec<ReplicaPlacement>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strategy: StrategyKind,
    #[serde(default)]
    pub rscp: RscpParams,
    pub topology: TopologyConfig,
    pub files: FilesConfig,
    #[serde(default)]
    pub distribution: DistributionConfig,
    pub jobs: WorkloadSpec,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_name() -> String {
    "scenario".into()
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes to JSON");
        hex::encode(Sha256::digest(json))
    }

    /// Copy with the dotted `key` set to `value`, a TOML literal or a bare
    /// string, e.g. `rscp.minsupp=0.1` or `strategy=lru`.
    pub fn with_param(&self, key: &str, value: &str) -> Result<Self, ScenarioError> {
        let mut root = toml::Value::try_from(self)?;
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_owned()));
        let mut slot = &mut root;
        for part in key.split('.') {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| invalid(key, "not a table"))?;
            slot = table.entry(part).or_insert(toml::Value::Boolean(false));
        }
        *slot = parsed;
        let config: ScenarioConfig = root
            .try_into()
            .map_err(|e: toml::de::Error| invalid(key, e.message().to_owned()))?;
        Ok(config)
    }

    /// Applies `key=value` overrides in order.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ScenarioError> {
        overrides.iter().try_fold(self.clone(), |cfg, o| {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| ScenarioError::BadOverride(o.to_owned()))?;
            cfg.with_param(k.trim(), v.trim())
        })
    }

    fn site_specs(&self) -> Result<Vec<SiteSpec>, ScenarioError> {
        let t = &self.topology;
        if t.site_count == 0 {
            return Err(invalid("topology.site_count", "must be at least 1"));
        }
        let mut sites: Vec<SiteSpec> = (0..t.site_count)
            .map(|i| SiteSpec {
                id: SiteId(i),
                capacity_mb: t.capacity_mb,
                failure_profile: t.failure_profile,
            })
            .collect();
        for (i, o) in t.site_overrides.iter().enumerate() {
            let site = sites.get_mut(o.site.index()).ok_or_else(|| {
                invalid(
                    format!("topology.site_overrides[{i}].site"),
                    format!("unknown site {}", o.site),
                )
            })?;
            if let Some(c) = o.capacity_mb {
                site.capacity_mb = c;
            }
            if let Some(p) = o.failure_profile {
                site.failure_profile = p;
            }
        }
        Ok(sites)
    }

    pub fn topology(&self) -> Result<GridTopology, ScenarioError> {
        let sites = self.site_specs()?;
        let n = sites.len();
        let matrix = match &self.topology.bandwidth_matrix {
            Some(m) => {
                if !self.topology.bandwidth_overrides.is_empty() {
                    return Err(invalid(
                        "topology.bandwidth_overrides",
                        "cannot be combined with bandwidth_matrix",
                    ));
                }
                m.clone()
            }
            None => {
                let mut m = vec![vec![self.topology.bandwidth_mb_per_s; n]; n];
                for (i, o) in self.topology.bandwidth_overrides.iter().enumerate() {
                    if o.a.index() >= n || o.b.index() >= n {
                        return Err(invalid(
                            format!("topology.bandwidth_overrides[{i}]"),
                            format!("unknown site in link {}-{}", o.a, o.b),
                        ));
                    }
                    m[o.a.index()][o.b.index()] = o.mb_per_s;
                    m[o.b.index()][o.a.index()] = o.mb_per_s;
                }
                m
            }
        };
        Ok(GridTopology::new(sites, matrix)?)
    }

    pub fn file_specs(&self) -> Result<Vec<FileSpec>, ScenarioError> {
        let f = &self.files;
        if f.count == 0 {
            return Err(invalid("files.count", "must be at least 1"));
        }
        let sizes = match &f.sizes_mb {
            Some(s) if s.len() != f.count as usize => {
                return Err(invalid(
                    "files.sizes_mb",
                    format!("has {} entries for {} files", s.len(), f.count),
                ))
            }
            Some(s) => s.clone(),
            None => vec![f.size_mb; f.count as usize],
        };
        Ok(sizes
            .into_iter()
            .enumerate()
            .map(|(i, size_mb)| FileSpec {
                id: FileId(i as u32),
                size_mb,
            })
            .collect())
    }

    pub fn masters(&self) -> Result<Vec<SiteId>, ScenarioError> {
        let pool: Vec<SiteId> = if self.files.master_sites.is_empty() {
            (0..self.topology.site_count).map(SiteId).collect()
        } else {
            self.files.master_sites.clone()
        };
        if let Some(bad) = pool.iter().find(|s| s.0 >= self.topology.site_count) {
            return Err(invalid("files.master_sites", format!("unknown site {bad}")));
        }
        Ok((0..self.files.count as usize)
            .map(|i| pool[i % pool.len()])
            .collect())
    }

    /// Validates everything and builds the runnable scenario.
    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let topology = self.topology()?;
        let files = self.file_specs()?;
        let masters = self.masters()?;
        let mut initial = GridState::new(&topology, files, &masters)?;
        for (i, r) in self.distribution.replicas.iter().enumerate() {
            let path = format!("distribution.replicas[{i}]");
            if r.file.0 >= self.files.count {
                return Err(invalid(path, format!("unknown file {}", r.file)));
            }
            for &site in &r.sites {
                if site.0 >= self.topology.site_count {
                    return Err(invalid(path, format!("unknown site {site}")));
                }
                if initial.holds(r.file, site) {
                    continue;
                }
                initial
                    .place_replica(r.file, site)
                    .map_err(|e| invalid(path.clone(), e.to_string()))?;
            }
        }
        if let Some(bad) = self
            .jobs
            .origins
            .iter()
            .find(|s| s.0 >= self.topology.site_count)
        {
            return Err(invalid("jobs.origins", format!("unknown site {bad}")));
        }
        self.rscp
            .thresholds()
            .map_err(|e| invalid("rscp", e.to_string()))?;
        if self.rscp.period_jobs == 0 {
            return Err(invalid("rscp.period_jobs", "must be at least 1"));
        }
        let jobs =
            self.jobs
                .generate_jobs(self.files.count, self.topology.site_count, self.seed)?;
        Ok(Scenario {
            config: self.clone(),
            topology,
            initial,
            jobs,
        })
    }
}

/// A validated scenario with its topology, initial grid and job list.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub topology: GridTopology,
    pub initial: GridState,
    pub jobs: Vec<JobSpec>,
}

/// Metrics as of one period boundary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodSnapshot {
    pub period: u32,
    pub jobs_completed: u32,
    pub clock_ms: f64,
    pub metrics: MetricReport,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub report: MetricReport,
    pub output: SimulationOutput,
    pub periods: Vec<PeriodSnapshot>,
}

impl Scenario {
    pub fn input(&self, strategy: StrategyKind) -> SimulationInput {
        SimulationInput {
            topology: self.topology.clone(),
            initial: self.initial.clone(),
            jobs: self.jobs.clone(),
            seed: self.config.seed,
            strategy,
            rscp: self.config.rscp.clone(),
        }
    }

    /// DisQ of the initial distribution: the quality measured when the same
    /// jobs run against it without any replication.
    pub fn initial_disq(&self) -> Result<f64, ScenarioError> {
        let probe = crate::engine::simulate(&self.input(StrategyKind::NoReplication))?;
        let report = MetricReport::compute_with_final(
            &self.topology,
            &self.initial,
            &probe.final_grid,
            &probe.log,
            0.0,
        )?;
        Ok(report.disq)
    }

    /// Runs the configured strategy. With `snapshots`, metrics are also
    /// computed at every period boundary.
    pub fn run(&self, snapshots: bool) -> Result<RunResult, ScenarioError> {
        let initial_disq = self.initial_disq()?;
        let input = self.input(self.config.strategy);
        let mut periods = Vec::new();
        let mut failure = None;
        let output = Engine::new(&input)?.run(&input.jobs, input.seed, |engine, mark| {
            if !snapshots || failure.is_some() {
                return;
            }
            match MetricReport::compute_with_final(
                &self.topology,
                &self.initial,
                engine.grid(),
                engine.log(),
                initial_disq,
            ) {
                Ok(metrics) => periods.push(PeriodSnapshot {
                    period: mark.period,
                    jobs_completed: mark.jobs_completed,
                    clock_ms: mark.clock_ms,
                    metrics,
                }),
                Err(e) => failure = Some(e),
            }
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        let report = MetricReport::compute_with_final(
            &self.topology,
            &self.initial,
            &output.final_grid,
            &output.log,
            initial_disq,
        )?;
        Ok(RunResult {
            report,
            output,
            periods,
        })
    }
}
