use super::{ReplicationStrategy, RequestContext, StrategyVerdict};

/// Baseline that never creates replicas.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoReplication;

impl ReplicationStrategy for NoReplication {
    fn name(&self) -> &'static str {
        "no_replication"
    }

    fn on_request(&mut self, _ctx: &RequestContext<'_>) -> StrategyVerdict {
        StrategyVerdict::RemoteRead
    }
}
