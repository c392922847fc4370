//! Replication strategies behind a single per-site interface.
//!
//! Every site of a run owns its own strategy instance. Non-periodic
//! strategies decide inside [`ReplicationStrategy::on_request`] for each
//! request that misses locally; periodic ones act in
//! [`ReplicationStrategy::on_period_end`] through a [`PeriodActions`] handle
//! the engine provides.

mod lru;
mod no_replication;
mod rscp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{FileId, GridError, GridState, GridTopology, JobId, SiteId};
use crate::mining::MiningError;
use crate::workload::AccessHistory;

pub use lru::Lru;
pub use no_replication::NoReplication;
pub use rscp::{file_weight, plan_group, FileWeight, GroupPlan, Rscp, RscpParams, WeightedFile};

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// What to do with a request whose file is not held locally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StrategyVerdict {
    RemoteRead,
    /// Delete `deletions` locally, then replicate the file here and read it.
    ReplicateHere {
        deletions: Vec<FileId>,
    },
}

pub struct RequestContext<'a> {
    pub site: SiteId,
    pub file: FileId,
    pub job: JobId,
    pub grid: &'a GridState,
    pub topology: &'a GridTopology,
}

/// Grid operations a periodic strategy may perform on its own site.
pub trait PeriodActions {
    fn site(&self) -> SiteId;
    fn grid(&self) -> &GridState;
    fn topology(&self) -> &GridTopology;
    /// Copies `file` here from the best reachable holder. `Ok(false)` when
    /// every holder was observed failed.
    fn replicate(&mut self, file: FileId) -> Result<bool, GridError>;
    fn delete(&mut self, file: FileId) -> Result<(), GridError>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum GroupAction {
    AlreadyLocal,
    Replicated {
        fetched: Vec<FileId>,
        failed: Vec<FileId>,
        deleted: Vec<FileId>,
    },
    SkippedTooLarge,
    SkippedNotEnoughEvictable,
    SkippedUnprofitable {
        avg_candidate_del_weight: f64,
        avg_group_rep_weight: f64,
    },
}

/// What a periodic strategy did with one correlated group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupOutcome {
    pub site: SiteId,
    pub period: u32,
    pub files: Vec<FileId>,
    #[serde(flatten)]
    pub action: GroupAction,
}

pub trait ReplicationStrategy: Send {
    fn name(&self) -> &'static str;

    fn on_request(&mut self, ctx: &RequestContext<'_>) -> StrategyVerdict;

    /// A file held by this site was just read or placed; `tick` is monotone.
    fn on_access(&mut self, _file: FileId, _tick: u64) {}

    fn is_periodic(&self) -> bool {
        false
    }

    /// Called at each period boundary with the site's just-closed history.
    fn on_period_end(
        &mut self,
        _history: &AccessHistory,
        _actions: &mut dyn PeriodActions,
    ) -> Result<Vec<GroupOutcome>, StrategyError> {
        Ok(Vec::new())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[default]
    NoReplication,
    Lru,
    Rscp,
}

impl StrategyKind {
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::NoReplication => "no_replication",
            StrategyKind::Lru => "lru",
            StrategyKind::Rscp => "rscp",
        }
    }

    /// One instance for `site`.
    pub fn build(self, site: SiteId, rscp: &RscpParams) -> Box<dyn ReplicationStrategy> {
        match self {
            StrategyKind::NoReplication => Box::new(NoReplication),
            StrategyKind::Lru => Box::new(Lru::new(site)),
            StrategyKind::Rscp => Box::new(Rscp::new(site, rscp.clone())),
        }
    }
}
