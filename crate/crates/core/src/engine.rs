//! Deterministic simulation loop. Jobs run one after another at their origin
//! site; each file request becomes a local access, a remote access, or a
//! replication followed by a local access, and every outcome is appended to
//! the [`EventLog`].

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{FileId, GridError, GridState, GridTopology, JobId, SiteId, SiteStats};
use crate::strategies::{
    GroupOutcome, PeriodActions, ReplicationStrategy, RequestContext, RscpParams, StrategyError,
    StrategyKind, StrategyVerdict,
};
use crate::workload::{
    seeded_stream, AccessHistory, HistoryRecorder, JobSpec, RequestGenerator, WorkloadError,
};

/// RNG stream for per-attempt failure sampling.
const FAILURE_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("job {job} originates at unknown site {site}")]
    UnknownOrigin { job: JobId, site: SiteId },
    #[error("period length must be at least one job")]
    ZeroPeriod,
    #[error("strategy at {site} proposed deleting {file}, which it may not delete")]
    BadDeletion { site: SiteId, file: FileId },
    #[error("strategy at {site} did not free enough space for {file}")]
    VerdictDoesNotFit { site: SiteId, file: FileId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    LocalAccess,
    RemoteAccess,
    Replication,
    Deletion,
    SiteFailureObserved,
    RequestAborted,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::LocalAccess => "local_access",
            EventKind::RemoteAccess => "remote_access",
            EventKind::Replication => "replication",
            EventKind::Deletion => "deletion",
            EventKind::SiteFailureObserved => "site_failure",
            EventKind::RequestAborted => "request_aborted",
        }
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "local_access" => EventKind::LocalAccess,
            "remote_access" => EventKind::RemoteAccess,
            "replication" => EventKind::Replication,
            "deletion" => EventKind::Deletion,
            "site_failure" => EventKind::SiteFailureObserved,
            "request_aborted" => EventKind::RequestAborted,
            other => return Err(format!("unknown event kind {other:?}")),
        })
    }
}

/// One log record. For transfers `holder` is the source site; for
/// deletions, failures and aborts it is the site concerned.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event {
    pub timestamp_ms: f64,
    pub kind: EventKind,
    pub requester: SiteId,
    pub holder: SiteId,
    pub file: FileId,
    pub job: Option<JobId>,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} ",
            self.timestamp_ms,
            self.kind.as_str(),
            self.requester.0,
            self.holder.0,
            self.file.0
        )?;
        match self.job {
            Some(job) => write!(f, "{}", job.0),
            None => f.write_str("-"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("event log line {line}: {reason}")]
pub struct LogParseError {
    pub line: usize,
    pub reason: String,
}

/// Append-only, time-ordered record of everything a run did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn push(&mut self, event: Event) {
        debug_assert!(self
            .events
            .last()
            .is_none_or(|last| last.timestamp_ms <= event.timestamp_ms));
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Log truncated to its first `len` events.
    pub fn prefix(&self, len: usize) -> EventLog {
        EventLog {
            events: self.events[..len.min(self.events.len())].to_vec(),
        }
    }

    /// One record per line: `timestamp kind requester holder file job`.
    pub fn write_to(&self, mut out: impl Write) -> io::Result<()> {
        for e in &self.events {
            writeln!(out, "{e}")?;
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dump is ASCII")
    }

    pub fn parse(text: &str) -> Result<EventLog, LogParseError> {
        let mut log = EventLog::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| LogParseError {
                line: n + 1,
                reason,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            }
            let timestamp_ms: f64 = fields[0]
                .parse()
                .map_err(|_| err(format!("bad timestamp {:?}", fields[0])))?;
            let kind = fields[1].parse().map_err(err)?;
            let id = |s: &str| s.parse::<u32>().map_err(|_| err(format!("bad id {s:?}")));
            let job = match fields[5] {
                "-" => None,
                s => Some(JobId(id(s)?)),
            };
            if log
                .events
                .last()
                .is_some_and(|last| last.timestamp_ms > timestamp_ms)
            {
                return Err(err("timestamps go backwards".into()));
            }
            log.events.push(Event {
                timestamp_ms,
                kind,
                requester: SiteId(id(fields[2])?),
                holder: SiteId(id(fields[3])?),
                file: FileId(id(fields[4])?),
                job,
            });
        }
        Ok(log)
    }
}

/// Simulated time in milliseconds; never moves backwards.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Clock {
    now_ms: f64,
}

impl Clock {
    pub fn now(&self) -> f64 {
        self.now_ms
    }

    pub fn advance(&mut self, dt_ms: f64) {
        debug_assert!(dt_ms >= 0.0);
        self.now_ms += dt_ms.max(0.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RequestOutcome {
    Local,
    Remote { holder: SiteId },
    Replicated { source: SiteId },
    Aborted,
}

/// Marker recorded at every period boundary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodMark {
    pub period: u32,
    pub jobs_completed: u32,
    pub clock_ms: f64,
    pub log_len: usize,
}

/// Replays all Replication and Deletion events of `log` onto `initial`.
pub fn replay_catalog(initial: &GridState, log: &EventLog) -> Result<GridState, GridError> {
    let mut grid = initial.clone();
    for e in log.events() {
        match e.kind {
            EventKind::Replication => grid.place_replica(e.file, e.requester)?,
            EventKind::Deletion => grid.delete_replica(e.file, e.requester)?,
            _ => {}
        }
    }
    Ok(grid)
}

/// Fields the engine lends to a periodic strategy while it runs.
struct SiteActions<'a> {
    site: SiteId,
    topology: &'a GridTopology,
    grid: &'a mut GridState,
    log: &'a mut EventLog,
    stats: &'a mut [SiteStats],
    rng: &'a mut ChaCha8Rng,
    now: f64,
}

/// Tries holders in descending-bandwidth order, sampling a failure per
/// attempt. Returns the first holder that answered.
fn pick_source(
    file: FileId,
    requester: SiteId,
    job: Option<JobId>,
    now: f64,
    topology: &GridTopology,
    grid: &GridState,
    stats: &mut [SiteStats],
    rng: &mut ChaCha8Rng,
    log: &mut EventLog,
) -> Result<Option<SiteId>, GridError> {
    for holder in grid
        .catalog()
        .ranked_remote_holders(file, requester, topology)?
    {
        let stat = &mut stats[holder.index()];
        stat.site_requests += 1;
        let draw: f64 = rng.random();
        if draw < topology.sites()[holder.index()].failure_profile {
            stat.failures += 1;
            log.push(Event {
                timestamp_ms: now,
                kind: EventKind::SiteFailureObserved,
                requester,
                holder,
                file,
                job,
            });
            continue;
        }
        return Ok(Some(holder));
    }
    Ok(None)
}

impl PeriodActions for SiteActions<'_> {
    fn site(&self) -> SiteId {
        self.site
    }

    fn grid(&self) -> &GridState {
        self.grid
    }

    fn topology(&self) -> &GridTopology {
        self.topology
    }

    fn replicate(&mut self, file: FileId) -> Result<bool, GridError> {
        let source = pick_source(
            file,
            self.site,
            None,
            self.now,
            self.topology,
            self.grid,
            self.stats,
            self.rng,
            self.log,
        )?;
        let Some(source) = source else {
            return Ok(false);
        };
        self.grid.place_replica(file, self.site)?;
        self.log.push(Event {
            timestamp_ms: self.now,
            kind: EventKind::Replication,
            requester: self.site,
            holder: source,
            file,
            job: None,
        });
        Ok(true)
    }

    fn delete(&mut self, file: FileId) -> Result<(), GridError> {
        self.grid.delete_replica(file, self.site)?;
        self.log.push(Event {
            timestamp_ms: self.now,
            kind: EventKind::Deletion,
            requester: self.site,
            holder: self.site,
            file,
            job: None,
        });
        Ok(())
    }
}

/// Everything needed to run one simulation.
#[derive(Clone, Debug)]
pub struct SimulationInput {
    pub topology: GridTopology,
    pub initial: GridState,
    pub jobs: Vec<JobSpec>,
    pub seed: u64,
    pub strategy: StrategyKind,
    pub rscp: RscpParams,
}

pub struct Engine {
    topology: GridTopology,
    grid: GridState,
    strategies: Vec<Box<dyn ReplicationStrategy>>,
    recorders: Vec<HistoryRecorder>,
    stats: Vec<SiteStats>,
    rng: ChaCha8Rng,
    log: EventLog,
    clock: Clock,
    period_jobs: u32,
    outcomes: Vec<GroupOutcome>,
}

impl Engine {
    pub fn new(input: &SimulationInput) -> Result<Self, EngineError> {
        if input.rscp.period_jobs == 0 {
            return Err(EngineError::ZeroPeriod);
        }
        let sites: Vec<SiteId> = input.topology.site_ids().collect();
        Ok(Engine {
            strategies: sites
                .iter()
                .map(|&s| input.strategy.build(s, &input.rscp))
                .collect(),
            recorders: sites.iter().map(|&s| HistoryRecorder::new(s)).collect(),
            stats: vec![SiteStats::default(); sites.len()],
            rng: seeded_stream(input.seed, FAILURE_STREAM),
            topology: input.topology.clone(),
            grid: input.initial.clone(),
            log: EventLog::new(),
            clock: Clock::default(),
            period_jobs: input.rscp.period_jobs,
            outcomes: Vec::new(),
        })
    }

    pub fn topology(&self) -> &GridTopology {
        &self.topology
    }

    pub fn grid(&self) -> &GridState {
        &self.grid
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn stats(&self) -> &[SiteStats] {
        &self.stats
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    fn emit(
        &mut self,
        kind: EventKind,
        requester: SiteId,
        holder: SiteId,
        file: FileId,
        job: Option<JobId>,
    ) {
        self.log.push(Event {
            timestamp_ms: self.clock.now(),
            kind,
            requester,
            holder,
            file,
            job,
        });
    }

    fn tick(&self) -> u64 {
        self.log.len() as u64
    }

    /// Serves one request of `job` for `file` at the job's origin.
    pub fn resolve_request(
        &mut self,
        job: &JobSpec,
        file: FileId,
    ) -> Result<RequestOutcome, EngineError> {
        let site = job.origin;
        if site.index() >= self.topology.site_count() {
            return Err(EngineError::UnknownOrigin { job: job.id, site });
        }
        self.grid.catalog().holders(file)?;
        self.recorders[site.index()].record_access(job.id, file);

        if self.grid.holds(file, site) {
            let tick = self.tick();
            self.strategies[site.index()].on_access(file, tick);
            self.emit(EventKind::LocalAccess, site, site, file, Some(job.id));
            return Ok(RequestOutcome::Local);
        }

        let verdict = self.strategies[site.index()].on_request(&RequestContext {
            site,
            file,
            job: job.id,
            grid: &self.grid,
            topology: &self.topology,
        });
        let source = pick_source(
            file,
            site,
            Some(job.id),
            self.clock.now(),
            &self.topology,
            &self.grid,
            &mut self.stats,
            &mut self.rng,
            &mut self.log,
        )?;
        let Some(source) = source else {
            self.emit(EventKind::RequestAborted, site, site, file, Some(job.id));
            return Ok(RequestOutcome::Aborted);
        };
        let transfer = self
            .topology
            .transfer_ms(self.grid.size(file), source, site);

        match verdict {
            StrategyVerdict::RemoteRead => {
                self.clock.advance(transfer);
                self.emit(EventKind::RemoteAccess, site, source, file, Some(job.id));
                Ok(RequestOutcome::Remote { holder: source })
            }
            StrategyVerdict::ReplicateHere { deletions } => {
                for &victim in &deletions {
                    if victim == file || self.grid.catalog().is_master(victim, site) {
                        return Err(EngineError::BadDeletion { site, file: victim });
                    }
                    self.grid.delete_replica(victim, site)?;
                    self.emit(EventKind::Deletion, site, site, victim, Some(job.id));
                }
                if !self.grid.fits(site, self.grid.size(file)) {
                    return Err(EngineError::VerdictDoesNotFit { site, file });
                }
                self.grid.place_replica(file, site)?;
                self.clock.advance(transfer);
                self.emit(EventKind::Replication, site, source, file, Some(job.id));
                let tick = self.tick();
                self.strategies[site.index()].on_access(file, tick);
                self.emit(EventKind::LocalAccess, site, site, file, Some(job.id));
                Ok(RequestOutcome::Replicated { source })
            }
        }
    }

    /// Closes every site's history; periodic strategies act when `act`.
    pub fn close_period(&mut self, act: bool) -> Result<Vec<AccessHistory>, EngineError> {
        let mut histories = Vec::with_capacity(self.recorders.len());
        for i in 0..self.recorders.len() {
            let history = self.recorders[i].close_period();
            if act && self.strategies[i].is_periodic() {
                let mut actions = SiteActions {
                    site: SiteId(i as u32),
                    topology: &self.topology,
                    grid: &mut self.grid,
                    log: &mut self.log,
                    stats: &mut self.stats,
                    rng: &mut self.rng,
                    now: self.clock.now(),
                };
                let outcomes = self.strategies[i].on_period_end(&history, &mut actions)?;
                self.outcomes.extend(outcomes);
            }
            histories.push(history);
        }
        Ok(histories)
    }

    /// Runs every job; `on_period` sees the engine after each boundary.
    /// Periodic strategies are not invoked after the last job.
    pub fn run(
        mut self,
        jobs: &[JobSpec],
        seed: u64,
        mut on_period: impl FnMut(&Engine, &PeriodMark),
    ) -> Result<SimulationOutput, EngineError> {
        let mut marks = Vec::new();
        let mut completed = 0u32;
        for (i, job) in jobs.iter().enumerate() {
            self.recorders
                .get_mut(job.origin.index())
                .ok_or(EngineError::UnknownOrigin {
                    job: job.id,
                    site: job.origin,
                })?
                .start_job(job.id);
            for file in RequestGenerator::new(job, seed)? {
                self.resolve_request(job, file)?;
            }
            completed += 1;
            let last = i + 1 == jobs.len();
            if completed.is_multiple_of(self.period_jobs) || last {
                let period = self.recorders.first().map_or(0, HistoryRecorder::period);
                self.close_period(!last)?;
                let mark = PeriodMark {
                    period,
                    jobs_completed: completed,
                    clock_ms: self.clock.now(),
                    log_len: self.log.len(),
                };
                on_period(&self, &mark);
                marks.push(mark);
            }
        }
        Ok(SimulationOutput {
            log: self.log,
            final_grid: self.grid,
            stats: self.stats,
            periods: marks,
            group_outcomes: self.outcomes,
            clock_ms: self.clock.now(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SimulationOutput {
    pub log: EventLog,
    pub final_grid: GridState,
    pub stats: Vec<SiteStats>,
    pub periods: Vec<PeriodMark>,
    pub group_outcomes: Vec<GroupOutcome>,
    pub clock_ms: f64,
}

pub fn simulate(input: &SimulationInput) -> Result<SimulationOutput, EngineError> {
    Engine::new(input)?.run(&input.jobs, input.seed, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FileSpec, SiteSpec};
    use crate::workload::AccessPattern;

    fn input(strategy: StrategyKind, failure: f64, holders: &[u32]) -> SimulationInput {
        let sites = (0..3)
            .map(|i| SiteSpec {
                id: SiteId(i),
                capacity_mb: 1000.0,
                failure_profile: if i == 0 { 0.0 } else { failure },
            })
            .collect();
        let topo = GridTopology::uniform(sites, 10.0).unwrap();
        let files = vec![FileSpec {
            id: FileId(0),
            size_mb: 100.0,
        }];
        let mut grid = GridState::new(&topo, files, &[SiteId(holders[0])]).unwrap();
        for &h in &holders[1..] {
            grid.place_replica(FileId(0), SiteId(h)).unwrap();
        }
        SimulationInput {
            topology: topo,
            initial: grid,
            jobs: vec![JobSpec {
                id: JobId(0),
                origin: SiteId(0),
                request_count: 1,
                pattern: AccessPattern::Sequential,
                file_universe: vec![FileId(0)],
            }],
            seed: 1,
            strategy,
            rscp: RscpParams::default(),
        }
    }

    #[test]
    fn local_request_costs_nothing() {
        let out = simulate(&input(StrategyKind::NoReplication, 0.0, &[0])).unwrap();
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.log.events()[0].kind, EventKind::LocalAccess);
        assert_eq!(out.clock_ms, 0.0);
    }

    #[test]
    fn remote_read_costs_size_over_bandwidth() {
        let out = simulate(&input(StrategyKind::NoReplication, 0.0, &[1])).unwrap();
        let e = out.log.events()[0];
        assert_eq!(e.kind, EventKind::RemoteAccess);
        assert_eq!(e.holder, SiteId(1));
        assert_eq!(e.timestamp_ms, 10_000.0);
    }

    #[test]
    fn lru_replicates_then_reads_locally() {
        let out = simulate(&input(StrategyKind::Lru, 0.0, &[1])).unwrap();
        let kinds: Vec<_> = out.log.events().iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::Replication, EventKind::LocalAccess]);
        assert!(out.final_grid.holds(FileId(0), SiteId(0)));
    }

    #[test]
    fn all_holders_failed_aborts_the_request() {
        let mut inp = input(StrategyKind::NoReplication, 0.999_999, &[1, 2]);
        inp.seed = 3;
        let out = simulate(&inp).unwrap();
        let kinds: Vec<_> = out.log.events().iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            [
                EventKind::SiteFailureObserved,
                EventKind::SiteFailureObserved,
                EventKind::RequestAborted
            ]
        );
        assert_eq!(
            out.stats[1],
            SiteStats {
                site_requests: 1,
                failures: 1
            }
        );
    }

    #[test]
    fn log_dump_round_trips() {
        let out = simulate(&input(StrategyKind::Lru, 0.0, &[1])).unwrap();
        let text = out.log.dump();
        assert_eq!(
            text,
            "10000 replication 0 1 0 0\n10000 local_access 0 0 0 0\n"
        );
        assert_eq!(EventLog::parse(&text).unwrap(), out.log);
        assert!(EventLog::parse("1 nope 0 0 0 -").is_err());
        assert_eq!(
            EventLog::parse("5 deletion 1 1 2 -\n1 deletion 1 1 2 -")
                .unwrap_err()
                .line,
            2
        );
    }

    #[test]
    fn replay_reconstructs_final_catalog() {
        let inp = input(StrategyKind::Lru, 0.0, &[1]);
        let out = simulate(&inp).unwrap();
        assert_eq!(
            replay_catalog(&inp.initial, &out.log).unwrap(),
            out.final_grid
        );
    }
}
