//! Metrics computed purely from an [`EventLog`] and the grid it ran on.
//!
//! Classical metrics (response time, ENU, hit ratio) only need event counts.
//! The distribution-quality metrics (RQD, RED, DisQ) also need bandwidths,
//! site availabilities derived from the log, and the replica catalog after
//! the run, which is rebuilt by replaying the log onto the initial state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{replay_catalog, EventKind, EventLog};
use crate::grid::{FileId, GridError, GridState, GridTopology, JobId, SiteId, SiteStats};

/// Floor substituted for a zero availability in remote-cost denominators.
pub const AVAILABILITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("event log does not replay onto the initial grid: {0}")]
    Replay(#[from] GridError),
    #[error("event references site {0} outside the topology")]
    UnknownSite(SiteId),
}

/// Event totals by kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounts {
    pub local: u64,
    pub remote: u64,
    pub replications: u64,
    pub deletions: u64,
    pub failures: u64,
    pub aborted: u64,
}

impl AccessCounts {
    pub fn from_log(log: &EventLog) -> Self {
        let mut c = AccessCounts::default();
        for e in log.events() {
            match e.kind {
                EventKind::LocalAccess => c.local += 1,
                EventKind::RemoteAccess => c.remote += 1,
                EventKind::Replication => c.replications += 1,
                EventKind::Deletion => c.deletions += 1,
                EventKind::SiteFailureObserved => c.failures += 1,
                EventKind::RequestAborted => c.aborted += 1,
            }
        }
        c
    }
}

/// Per-replica request counts derived from a log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccessLedger {
    /// (requester, file, holder) -> remote reads served by holder.
    remote: BTreeMap<(SiteId, FileId, SiteId), u64>,
    /// (requester, file, source) -> replications copied from source.
    replications: BTreeMap<(SiteId, FileId, SiteId), u64>,
    /// (site, file) -> local reads.
    local: BTreeMap<(SiteId, FileId), u64>,
    /// (site, file) -> job requests issued, whatever their outcome.
    requests: BTreeMap<(SiteId, FileId), u64>,
    stats: Vec<SiteStats>,
}

impl AccessLedger {
    pub fn from_log(log: &EventLog, site_count: usize) -> Result<Self, MetricsError> {
        let mut ledger = AccessLedger {
            stats: vec![SiteStats::default(); site_count],
            ..AccessLedger::default()
        };
        for e in log.events() {
            for s in [e.requester, e.holder] {
                if s.index() >= site_count {
                    return Err(MetricsError::UnknownSite(s));
                }
            }
            match e.kind {
                EventKind::LocalAccess => {
                    *ledger.local.entry((e.requester, e.file)).or_default() += 1;
                    *ledger.requests.entry((e.requester, e.file)).or_default() += 1;
                }
                EventKind::RemoteAccess => {
                    *ledger
                        .remote
                        .entry((e.requester, e.file, e.holder))
                        .or_default() += 1;
                    *ledger.requests.entry((e.requester, e.file)).or_default() += 1;
                    ledger.stats[e.holder.index()].site_requests += 1;
                }
                EventKind::Replication => {
                    *ledger
                        .replications
                        .entry((e.requester, e.file, e.holder))
                        .or_default() += 1;
                    ledger.stats[e.holder.index()].site_requests += 1;
                }
                EventKind::SiteFailureObserved => {
                    let stat = &mut ledger.stats[e.holder.index()];
                    stat.site_requests += 1;
                    stat.failures += 1;
                }
                EventKind::RequestAborted => {
                    *ledger.requests.entry((e.requester, e.file)).or_default() += 1;
                }
                EventKind::Deletion => {}
            }
        }
        Ok(ledger)
    }

    pub fn site_stats(&self) -> &[SiteStats] {
        &self.stats
    }

    pub fn availability(&self, site: SiteId) -> f64 {
        self.stats[site.index()].availability()
    }

    pub fn local_count(&self, site: SiteId, file: FileId) -> u64 {
        self.local.get(&(site, file)).copied().unwrap_or(0)
    }

    pub fn request_count(&self, site: SiteId, file: FileId) -> u64 {
        self.requests.get(&(site, file)).copied().unwrap_or(0)
    }

    /// Remote reads of `file` served by `holder`, keyed by requester.
    pub fn remote_requesters(
        &self,
        file: FileId,
        holder: SiteId,
    ) -> impl Iterator<Item = (SiteId, u64)> + '_ {
        self.remote
            .iter()
            .filter(move |((_, f, h), _)| *f == file && *h == holder)
            .map(|((k, _, _), &n)| (*k, n))
    }

    pub fn remote_streams(&self) -> impl Iterator<Item = ((SiteId, FileId, SiteId), u64)> + '_ {
        self.remote.iter().map(|(&k, &n)| (k, n))
    }

    pub fn replication_streams(
        &self,
    ) -> impl Iterator<Item = ((SiteId, FileId, SiteId), u64)> + '_ {
        self.replications.iter().map(|(&k, &n)| (k, n))
    }

    pub fn total_local(&self) -> u64 {
        self.local.values().sum()
    }

    pub fn total_remote(&self) -> u64 {
        self.remote.values().sum()
    }

    pub fn total_replications(&self) -> u64 {
        self.replications.values().sum()
    }
}

/// Transfer time charged to `job`.
pub fn response_time(log: &EventLog, job: JobId, topology: &GridTopology, grid: &GridState) -> f64 {
    log.events()
        .iter()
        .filter(|e| e.job == Some(job))
        .filter(|e| matches!(e.kind, EventKind::RemoteAccess | EventKind::Replication))
        .map(|e| topology.transfer_ms(grid.size(e.file), e.holder, e.requester))
        .sum()
}

/// Mean response time over every job that appears in the log.
pub fn mean_job_time(log: &EventLog, topology: &GridTopology, grid: &GridState) -> f64 {
    let mut per_job: BTreeMap<JobId, f64> = BTreeMap::new();
    for e in log.events() {
        let Some(job) = e.job else { continue };
        let t = per_job.entry(job).or_default();
        if matches!(e.kind, EventKind::RemoteAccess | EventKind::Replication) {
            *t += topology.transfer_ms(grid.size(e.file), e.holder, e.requester);
        }
    }
    mean(per_job.values().copied())
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// (remote + replications) / (remote + local). Not clamped.
pub fn enu(counts: &AccessCounts) -> f64 {
    let den = counts.remote + counts.local;
    if den == 0 {
        0.0
    } else {
        (counts.remote + counts.replications) as f64 / den as f64
    }
}

/// local / (local + remote + replications).
pub fn hit_ratio(counts: &AccessCounts) -> f64 {
    let den = counts.local + counts.remote + counts.replications;
    if den == 0 {
        0.0
    } else {
        counts.local as f64 / den as f64
    }
}

/// Σ over remote requesters of count × BW(requester, holder) × P(holder).
pub fn rqd_replica(
    file: FileId,
    holder: SiteId,
    ledger: &AccessLedger,
    topology: &GridTopology,
) -> f64 {
    let p = ledger.availability(holder);
    ledger
        .remote_requesters(file, holder)
        .map(|(k, n)| n as f64 * topology.bandwidth(k, holder) * p)
        .sum()
}

/// Mean over files of the mean replica weight.
pub fn rqd_files(grid: &GridState, ledger: &AccessLedger, topology: &GridTopology) -> f64 {
    mean(grid.files().iter().map(|f| {
        let holders = grid
            .catalog()
            .holders(f.id)
            .expect("file id comes from the grid");
        mean(
            holders
                .iter()
                .map(|&h| rqd_replica(f.id, h, ledger, topology)),
        )
    }))
}

/// Mean over sites of the mean weight of the replicas they hold; a site
/// holding nothing counts as 0.
pub fn rqd_sites(grid: &GridState, ledger: &AccessLedger, topology: &GridTopology) -> f64 {
    mean(topology.site_ids().map(|s| {
        mean(
            grid.catalog()
                .files_at(s)
                .map(|f| rqd_replica(f, s, ledger, topology)),
        )
    }))
}

/// Replication benefit over replication-plus-remote cost.
///
/// Each distinct (requester, file, source) replication stream contributes
/// requests(requester, file) × P(requester) / BW; each remote stream
/// contributes count / (BW × P(holder)).
pub fn red(ledger: &AccessLedger, topology: &GridTopology) -> f64 {
    let rep: f64 = ledger
        .replication_streams()
        .map(|((k, f, src), _)| {
            ledger.request_count(k, f) as f64 * ledger.availability(k) / topology.bandwidth(k, src)
        })
        .sum();
    let remote: f64 = ledger
        .remote_streams()
        .map(|((k, _, h), n)| {
            n as f64 / (topology.bandwidth(k, h) * ledger.availability(h).max(AVAILABILITY_FLOOR))
        })
        .sum();
    if rep == 0.0 {
        0.0
    } else {
        rep / (rep + remote)
    }
}

/// Local cost over local-plus-remote cost of one replica, or `None` when the
/// replica saw no accesses at all.
pub fn replica_weight(
    file: FileId,
    holder: SiteId,
    ledger: &AccessLedger,
    topology: &GridTopology,
) -> Option<f64> {
    let local = ledger.local_count(holder, file) as f64;
    let p = ledger.availability(holder).max(AVAILABILITY_FLOOR);
    let remote: f64 = ledger
        .remote_requesters(file, holder)
        .map(|(k, n)| n as f64 / (topology.bandwidth(k, holder) * p))
        .sum();
    (local + remote > 0.0).then(|| local / (local + remote))
}

/// Mean over files of the mean replica weight, skipping unaccessed replicas
/// and files left with none.
pub fn disq(grid: &GridState, ledger: &AccessLedger, topology: &GridTopology) -> f64 {
    let per_file = grid.files().iter().filter_map(|f| {
        let holders = grid
            .catalog()
            .holders(f.id)
            .expect("file id comes from the grid");
        let weights: Vec<f64> = holders
            .iter()
            .filter_map(|&h| replica_weight(f.id, h, ledger, topology))
            .collect();
        (!weights.is_empty()).then(|| mean(weights))
    });
    mean(per_file)
}

/// Sign of the correction: `Direct` (X = +1) for metrics where higher is
/// better, `Inverse` (X = −1) for costs such as RT and ENU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrectionSign {
    Direct,
    Inverse,
}

impl CorrectionSign {
    pub fn x(self) -> f64 {
        match self {
            CorrectionSign::Direct => 1.0,
            CorrectionSign::Inverse => -1.0,
        }
    }
}

/// `metric − disq × metric × X`.
pub fn correct_metric(metric: f64, disq: f64, sign: CorrectionSign) -> f64 {
    metric - disq * metric * sign.x()
}

/// `(a − b) / a × 100`; 0 when both are 0, NaN when only `a` is.
pub fn performance_difference(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        if b == 0.0 {
            0.0
        } else {
            f64::NAN
        }
    } else {
        (a - b) / a * 100.0
    }
}

/// Rounds half away from negative infinity at `decimals` places.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (value * scale + 0.5).floor() / scale
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub jobs: u64,
    pub rt_mean_ms: f64,
    pub enu: f64,
    pub enu_exceeds_one: bool,
    pub hit_ratio: f64,
    pub local_accesses: u64,
    pub remote_accesses: u64,
    pub aborted_requests: u64,
    pub replication_count: u64,
    pub deletion_count: u64,
    pub storage_fill_pct: f64,
    pub rqd_files: f64,
    pub rqd_sites: f64,
    pub red: f64,
    pub disq: f64,
    pub initial_disq: f64,
    pub correct_rt_ms: f64,
    pub correct_enu: f64,
}

impl MetricReport {
    /// Every metric of a run. `initial_disq` is the quality of the starting
    /// distribution, used by the correction process.
    pub fn compute(
        topology: &GridTopology,
        initial: &GridState,
        log: &EventLog,
        initial_disq: f64,
    ) -> Result<Self, MetricsError> {
        let final_grid = replay_catalog(initial, log)?;
        Self::compute_with_final(topology, initial, &final_grid, log, initial_disq)
    }

    /// As [`MetricReport::compute`] when the final grid is already known.
    pub fn compute_with_final(
        topology: &GridTopology,
        initial: &GridState,
        final_grid: &GridState,
        log: &EventLog,
        initial_disq: f64,
    ) -> Result<Self, MetricsError> {
        let ledger = AccessLedger::from_log(log, topology.site_count())?;
        let counts = AccessCounts::from_log(log);
        let jobs: BTreeSet<JobId> = log.events().iter().filter_map(|e| e.job).collect();
        let rt = mean_job_time(log, topology, initial);
        let enu = enu(&counts);
        Ok(MetricReport {
            jobs: jobs.len() as u64,
            rt_mean_ms: rt,
            enu,
            enu_exceeds_one: enu > 1.0,
            hit_ratio: hit_ratio(&counts),
            local_accesses: counts.local,
            remote_accesses: counts.remote,
            aborted_requests: counts.aborted,
            replication_count: counts.replications,
            deletion_count: counts.deletions,
            storage_fill_pct: final_grid.storage().fill_pct(),
            rqd_files: rqd_files(final_grid, &ledger, topology),
            rqd_sites: rqd_sites(final_grid, &ledger, topology),
            red: red(&ledger, topology),
            disq: disq(final_grid, &ledger, topology),
            initial_disq,
            correct_rt_ms: correct_metric(rt, initial_disq, CorrectionSign::Inverse),
            correct_enu: correct_metric(enu, initial_disq, CorrectionSign::Inverse),
        })
    }

    /// Copy with every value rounded for presentation: ms to integers,
    /// ratios to two decimals, the rest to four.
    pub fn rounded(&self) -> Self {
        let r2 = |v| round_half_up(v, 2);
        let r4 = |v| round_half_up(v, 4);
        MetricReport {
            rt_mean_ms: round_half_up(self.rt_mean_ms, 0),
            correct_rt_ms: round_half_up(self.correct_rt_ms, 0),
            enu: r2(self.enu),
            hit_ratio: r2(self.hit_ratio),
            red: r2(self.red),
            disq: r2(self.disq),
            initial_disq: r2(self.initial_disq),
            correct_enu: r2(self.correct_enu),
            storage_fill_pct: r2(self.storage_fill_pct),
            rqd_files: r4(self.rqd_files),
            rqd_sites: r4(self.rqd_sites),
            ..self.clone()
        }
    }
}
