//! Periodic replication of correlated file groups.
//!
//! At each period boundary a site turns its access history into a binary
//! context, mines the maximal frequent correlated patterns, and walks them
//! largest first. A group whose missing files fit in free space is fetched
//! outright. Otherwise local files are taken in ascending weight order as
//! deletion candidates until they would free enough room, and the swap
//! happens only if the candidates' mean weight does not exceed the mean
//! weight of the files to fetch.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{
    GroupAction, GroupOutcome, PeriodActions, ReplicationStrategy, RequestContext, StrategyError,
    StrategyVerdict,
};
use crate::grid::{FileId, GridState, GridTopology, SiteId};
use crate::mining::{mine_mfcp, to_binary_context, MiningThresholds, DEFAULT_MAX_CANDIDATES};
use crate::workload::AccessHistory;

const SPACE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RscpParams {
    pub minsupp: f64,
    pub min_all_confidence: f64,
    /// Period length in completed jobs, grid-wide.
    pub period_jobs: u32,
    /// Number of most recent periods feeding mining and file weights.
    pub history_window: u32,
    pub max_candidates: usize,
}

impl Default for RscpParams {
    fn default() -> Self {
        RscpParams {
            minsupp: 0.2,
            min_all_confidence: 0.5,
            period_jobs: 100,
            history_window: 1,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

impl RscpParams {
    pub fn thresholds(&self) -> Result<MiningThresholds, crate::mining::MiningError> {
        Ok(
            MiningThresholds::new(self.minsupp, self.min_all_confidence)?
                .with_max_candidates(self.max_candidates),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FileWeight {
    pub file: FileId,
    pub value: f64,
}

/// `size * site requests / bandwidth to the best other holder`. `None` when
/// no other site holds the file.
pub fn file_weight(
    file: FileId,
    site: SiteId,
    grid: &GridState,
    topology: &GridTopology,
    history: &AccessHistory,
) -> Option<FileWeight> {
    let best = *grid
        .catalog()
        .ranked_remote_holders(file, site, topology)
        .ok()?
        .first()?;
    let requests = history.site_requests(file) as f64;
    Some(FileWeight {
        file,
        value: grid.size(file) * requests / topology.bandwidth(site, best),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedFile {
    pub file: FileId,
    pub size_mb: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupPlan {
    Nothing,
    Fetch,
    Replace {
        deletions: Vec<FileId>,
        avg_candidate_del_weight: f64,
        avg_group_rep_weight: f64,
    },
    SkipTooLarge,
    SkipNotEnoughEvictable,
    SkipUnprofitable {
        avg_candidate_del_weight: f64,
        avg_group_rep_weight: f64,
    },
}

/// Decides what to do with one group given its missing files, the site's
/// free space and capacity, and the local files that may be deleted.
pub fn plan_group(
    missing: &[WeightedFile],
    free_mb: f64,
    capacity_mb: f64,
    evictable: &[WeightedFile],
) -> GroupPlan {
    if missing.is_empty() {
        return GroupPlan::Nothing;
    }
    let needed: f64 = missing.iter().map(|f| f.size_mb).sum();
    if needed > capacity_mb + SPACE_SLACK {
        return GroupPlan::SkipTooLarge;
    }
    if needed <= free_mb + SPACE_SLACK {
        return GroupPlan::Fetch;
    }
    let mut sorted = evictable.to_vec();
    sorted.sort_by(|a, b| a.weight.total_cmp(&b.weight).then(a.file.cmp(&b.file)));
    let mut accumulated_free = free_mb;
    let mut accumulated_weight = 0.0;
    let mut deletions = Vec::new();
    for candidate in sorted {
        if accumulated_free + SPACE_SLACK >= needed {
            break;
        }
        accumulated_free += candidate.size_mb;
        accumulated_weight += candidate.weight;
        deletions.push(candidate.file);
    }
    if accumulated_free + SPACE_SLACK < needed {
        return GroupPlan::SkipNotEnoughEvictable;
    }
    let avg_candidate_del_weight = accumulated_weight / deletions.len() as f64;
    let avg_group_rep_weight = missing.iter().map(|f| f.weight).sum::<f64>() / missing.len() as f64;
    if avg_candidate_del_weight <= avg_group_rep_weight {
        GroupPlan::Replace {
            deletions,
            avg_candidate_del_weight,
            avg_group_rep_weight,
        }
    } else {
        GroupPlan::SkipUnprofitable {
            avg_candidate_del_weight,
            avg_group_rep_weight,
        }
    }
}

/// Correlated-pattern replication for one site.
#[derive(Clone, Debug)]
pub struct Rscp {
    site: SiteId,
    params: RscpParams,
    window: VecDeque<AccessHistory>,
}

impl Rscp {
    pub fn new(site: SiteId, params: RscpParams) -> Self {
        Rscp {
            site,
            params,
            window: VecDeque::new(),
        }
    }

    fn weighted(
        &self,
        file: FileId,
        grid: &GridState,
        topology: &GridTopology,
        history: &AccessHistory,
    ) -> Option<WeightedFile> {
        file_weight(file, self.site, grid, topology, history).map(|w| WeightedFile {
            file,
            size_mb: grid.size(file),
            weight: w.value,
        })
    }

    fn process_group(
        &self,
        group: &[FileId],
        history: &AccessHistory,
        actions: &mut dyn PeriodActions,
    ) -> Result<GroupAction, StrategyError> {
        let grid = actions.grid();
        let topology = actions.topology();
        let members: BTreeSet<FileId> = group.iter().copied().collect();
        let missing: Vec<WeightedFile> = members
            .iter()
            .filter(|&&f| !grid.holds(f, self.site))
            .filter_map(|&f| self.weighted(f, grid, topology, history))
            .collect();
        let evictable: Vec<WeightedFile> = grid
            .catalog()
            .files_at(self.site)
            .filter(|f| !members.contains(f) && !grid.catalog().is_master(*f, self.site))
            .filter_map(|f| self.weighted(f, grid, topology, history))
            .collect();
        let plan = plan_group(
            &missing,
            grid.free(self.site),
            grid.storage().capacity(self.site),
            &evictable,
        );
        let deletions = match plan {
            GroupPlan::Nothing => return Ok(GroupAction::AlreadyLocal),
            GroupPlan::SkipTooLarge => return Ok(GroupAction::SkippedTooLarge),
            GroupPlan::SkipNotEnoughEvictable => return Ok(GroupAction::SkippedNotEnoughEvictable),
            GroupPlan::SkipUnprofitable {
                avg_candidate_del_weight,
                avg_group_rep_weight,
            } => {
                return Ok(GroupAction::SkippedUnprofitable {
                    avg_candidate_del_weight,
                    avg_group_rep_weight,
                })
            }
            GroupPlan::Fetch => Vec::new(),
            GroupPlan::Replace { deletions, .. } => deletions,
        };
        for &f in &deletions {
            actions.delete(f)?;
        }
        let mut fetched = Vec::new();
        let mut failed = Vec::new();
        for f in missing.iter().map(|w| w.file) {
            if actions.replicate(f)? {
                fetched.push(f);
            } else {
                failed.push(f);
            }
        }
        Ok(GroupAction::Replicated {
            fetched,
            failed,
            deleted: deletions,
        })
    }
}

impl ReplicationStrategy for Rscp {
    fn name(&self) -> &'static str {
        "rscp"
    }

    fn on_request(&mut self, _ctx: &RequestContext<'_>) -> StrategyVerdict {
        StrategyVerdict::RemoteRead
    }

    fn is_periodic(&self) -> bool {
        true
    }

    fn on_period_end(
        &mut self,
        history: &AccessHistory,
        actions: &mut dyn PeriodActions,
    ) -> Result<Vec<GroupOutcome>, StrategyError> {
        self.window.push_back(history.clone());
        while self.window.len() > self.params.history_window.max(1) as usize {
            self.window.pop_front();
        }
        let merged = AccessHistory::merged(self.site, &self.window);
        if merged.jobs().is_empty() {
            return Ok(Vec::new());
        }
        let thresholds = self.params.thresholds()?;
        let groups = mine_mfcp(&to_binary_context(&merged), &thresholds)?;
        let mut outcomes = Vec::with_capacity(groups.len());
        for group in groups {
            let files = group.files();
            let action = self.process_group(&files, &merged, actions)?;
            outcomes.push(GroupOutcome {
                site: self.site,
                period: history.period(),
                files,
                action,
            });
        }
        Ok(outcomes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FileSpec, GridError, JobId, SiteSpec};

    fn wf(file: u32, size_mb: f64, weight: f64) -> WeightedFile {
        WeightedFile {
            file: FileId(file),
            size_mb,
            weight,
        }
    }

    #[test]
    fn empty_missing_set_needs_nothing() {
        assert_eq!(plan_group(&[], 0.0, 100.0, &[]), GroupPlan::Nothing);
    }

    #[test]
    fn fitting_group_is_fetched() {
        assert_eq!(
            plan_group(&[wf(7, 80.0, 1.0)], 100.0, 200.0, &[]),
            GroupPlan::Fetch
        );
    }

    #[test]
    fn hand_traced_replacement() {
        // free 0; a (weight 1, 60 MB) and b (weight 5); c needs 50 MB with
        // weight 4 -> delete a alone, mean 1 <= 4.
        let plan = plan_group(
            &[wf(2, 50.0, 4.0)],
            0.0,
            200.0,
            &[wf(1, 40.0, 5.0), wf(0, 60.0, 1.0)],
        );
        assert_eq!(
            plan,
            GroupPlan::Replace {
                deletions: vec![FileId(0)],
                avg_candidate_del_weight: 1.0,
                avg_group_rep_weight: 4.0,
            }
        );
    }

    #[test]
    fn unprofitable_and_impossible_groups_are_skipped() {
        let plan = plan_group(&[wf(2, 50.0, 0.5)], 0.0, 200.0, &[wf(0, 60.0, 1.0)]);
        assert!(matches!(plan, GroupPlan::SkipUnprofitable { .. }));
        let plan = plan_group(&[wf(2, 50.0, 9.0)], 0.0, 200.0, &[wf(0, 20.0, 1.0)]);
        assert_eq!(plan, GroupPlan::SkipNotEnoughEvictable);
        let plan = plan_group(&[wf(2, 150.0, 9.0), wf(3, 60.0, 1.0)], 0.0, 200.0, &[]);
        assert_eq!(plan, GroupPlan::SkipTooLarge);
    }

    #[test]
    fn equal_weights_break_ties_by_file_id() {
        let plan = plan_group(
            &[wf(9, 10.0, 3.0)],
            0.0,
            100.0,
            &[wf(5, 10.0, 1.0), wf(4, 10.0, 1.0)],
        );
        assert!(
            matches!(plan, GroupPlan::Replace { deletions, .. } if deletions == vec![FileId(4)])
        );
    }

    fn two_site_grid(bw: f64) -> (GridTopology, GridState) {
        let sites = (0..2)
            .map(|i| SiteSpec {
                id: SiteId(i),
                capacity_mb: 1000.0,
                failure_profile: 0.0,
            })
            .collect();
        let topo = GridTopology::uniform(sites, bw).unwrap();
        let files = vec![
            FileSpec {
                id: FileId(0),
                size_mb: 10.0,
            },
            FileSpec {
                id: FileId(1),
                size_mb: 10.0,
            },
        ];
        let grid = GridState::new(&topo, files, &[SiteId(0), SiteId(0)]).unwrap();
        (topo, grid)
    }

    #[test]
    fn file_weight_examples() {
        // 10 MB, 6 requests from two jobs, 20 MB/s -> 3.0
        let history = AccessHistory::from_counts(
            SiteId(1),
            0,
            [],
            [(JobId(0), FileId(0), 4), (JobId(1), FileId(0), 2)],
        );
        let (topo, grid) = two_site_grid(20.0);
        let w = file_weight(FileId(0), SiteId(1), &grid, &topo, &history).unwrap();
        assert_eq!(w.value, 3.0);
        assert_eq!(
            file_weight(FileId(1), SiteId(1), &grid, &topo, &history)
                .unwrap()
                .value,
            0.0
        );
        let (topo, grid) = two_site_grid(40.0);
        let w = file_weight(FileId(0), SiteId(1), &grid, &topo, &history).unwrap();
        assert_eq!(w.value, 1.5);
        // the master's own site has no other holder to refetch from
        assert!(file_weight(FileId(0), SiteId(0), &grid, &topo, &history).is_none());
    }

    struct DirectActions<'a> {
        site: SiteId,
        grid: GridState,
        topology: &'a GridTopology,
        log: Vec<String>,
    }

    impl PeriodActions for DirectActions<'_> {
        fn site(&self) -> SiteId {
            self.site
        }
        fn grid(&self) -> &GridState {
            &self.grid
        }
        fn topology(&self) -> &GridTopology {
            self.topology
        }
        fn replicate(&mut self, file: FileId) -> Result<bool, GridError> {
            self.grid.place_replica(file, self.site)?;
            self.log.push(format!("+{file}"));
            Ok(true)
        }
        fn delete(&mut self, file: FileId) -> Result<(), GridError> {
            self.grid.delete_replica(file, self.site)?;
            self.log.push(format!("-{file}"));
            Ok(())
        }
    }

    #[test]
    fn period_end_replicates_mined_group() {
        let (topo, grid) = two_site_grid(10.0);
        let history = AccessHistory::from_counts(
            SiteId(1),
            0,
            [],
            [
                (JobId(0), FileId(0), 1),
                (JobId(0), FileId(1), 1),
                (JobId(1), FileId(0), 1),
                (JobId(1), FileId(1), 1),
            ],
        );
        let mut actions = DirectActions {
            site: SiteId(1),
            grid,
            topology: &topo,
            log: Vec::new(),
        };
        let mut rscp = Rscp::new(SiteId(1), RscpParams::default());
        let outcomes = rscp.on_period_end(&history, &mut actions).unwrap();
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].files, vec![FileId(0), FileId(1)]);
        assert_eq!(actions.log, ["+F0", "+F1"]);
        // Second period with the same history: already local.
        let outcomes = rscp.on_period_end(&history, &mut actions).unwrap();
        assert_eq!(outcomes[0].action, GroupAction::AlreadyLocal);
    }
}
