use std::collections::BTreeMap;

use super::{ReplicationStrategy, RequestContext, StrategyVerdict};
use crate::grid::{FileId, GridState, SiteId};

/// Always replicates on a miss, evicting least-recently-used non-master
/// replicas until the file fits.
#[derive(Clone, Debug)]
pub struct Lru {
    site: SiteId,
    last_used: BTreeMap<FileId, u64>,
}

impl Lru {
    pub fn new(site: SiteId) -> Self {
        Lru {
            site,
            last_used: BTreeMap::new(),
        }
    }

    /// Eviction list that makes room for `needed` MB, or `None` if even
    /// evicting every evictable replica is not enough.
    pub fn evictions(&self, grid: &GridState, needed: f64) -> Option<Vec<FileId>> {
        if grid.fits(self.site, needed) {
            return Some(Vec::new());
        }
        let mut evictable: Vec<(u64, FileId)> = grid
            .catalog()
            .files_at(self.site)
            .filter(|&f| !grid.catalog().is_master(f, self.site))
            .map(|f| (self.last_used.get(&f).copied().unwrap_or(0), f))
            .collect();
        evictable.sort_unstable();
        let mut freed = grid.free(self.site);
        let mut out = Vec::new();
        for (_, f) in evictable {
            if needed <= freed + 1e-9 {
                break;
            }
            freed += grid.size(f);
            out.push(f);
        }
        (needed <= freed + 1e-9).then_some(out)
    }
}

impl ReplicationStrategy for Lru {
    fn name(&self) -> &'static str {
        "lru"
    }

    fn on_request(&mut self, ctx: &RequestContext<'_>) -> StrategyVerdict {
        match self.evictions(ctx.grid, ctx.grid.size(ctx.file)) {
            Some(deletions) => StrategyVerdict::ReplicateHere { deletions },
            None => StrategyVerdict::RemoteRead,
        }
    }

    fn on_access(&mut self, file: FileId, tick: u64) {
        self.last_used.insert(file, tick);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FileSpec, GridTopology, JobId, SiteSpec};

    fn setup(capacity: f64, sizes: &[f64], masters: &[u32]) -> (GridTopology, GridState) {
        let sites = (0..2)
            .map(|i| SiteSpec {
                id: SiteId(i),
                capacity_mb: if i == 0 { 1e6 } else { capacity },
                failure_profile: 0.0,
            })
            .collect();
        let topo = GridTopology::uniform(sites, 10.0).unwrap();
        let files = sizes
            .iter()
            .enumerate()
            .map(|(i, &size_mb)| FileSpec {
                id: FileId(i as u32),
                size_mb,
            })
            .collect();
        let masters: Vec<SiteId> = masters.iter().map(|&s| SiteId(s)).collect();
        let grid = GridState::new(&topo, files, &masters).unwrap();
        (topo, grid)
    }

    fn verdict(lru: &mut Lru, grid: &GridState, topo: &GridTopology, file: u32) -> StrategyVerdict {
        lru.on_request(&RequestContext {
            site: SiteId(1),
            file: FileId(file),
            job: JobId(0),
            grid,
            topology: topo,
        })
    }

    #[test]
    fn replicates_without_eviction_when_space_suffices() {
        let (topo, grid) = setup(100.0, &[10.0], &[0]);
        let mut lru = Lru::new(SiteId(1));
        assert_eq!(
            verdict(&mut lru, &grid, &topo, 0),
            StrategyVerdict::ReplicateHere { deletions: vec![] }
        );
    }

    #[test]
    fn evicts_least_recent_first() {
        // f1 (30 MB, used at t=3) and f2 (30 MB, used at t=9) leave 20 MB
        // free; f0 needs 50 MB, so the older f1 goes.
        let (topo, mut grid) = setup(80.0, &[50.0, 30.0, 30.0], &[0, 0, 0]);
        grid.place_replica(FileId(1), SiteId(1)).unwrap();
        grid.place_replica(FileId(2), SiteId(1)).unwrap();
        let mut lru = Lru::new(SiteId(1));
        lru.on_access(FileId(1), 3);
        lru.on_access(FileId(2), 9);
        assert_eq!(
            verdict(&mut lru, &grid, &topo, 0),
            StrategyVerdict::ReplicateHere {
                deletions: vec![FileId(1)]
            }
        );
        lru.on_access(FileId(1), 12);
        assert_eq!(
            verdict(&mut lru, &grid, &topo, 0),
            StrategyVerdict::ReplicateHere {
                deletions: vec![FileId(2)]
            }
        );
    }

    #[test]
    fn falls_back_to_remote_read_when_nothing_can_fit() {
        let (topo, mut grid) = setup(60.0, &[70.0, 30.0, 20.0], &[0, 0, 1]);
        grid.place_replica(FileId(1), SiteId(1)).unwrap();
        let mut lru = Lru::new(SiteId(1));
        assert_eq!(
            verdict(&mut lru, &grid, &topo, 0),
            StrategyVerdict::RemoteRead
        );
        // Masters are never evicted: f2's master occupies 20 of 60 MB.
        let (topo, grid) = setup(60.0, &[50.0, 30.0, 20.0], &[0, 0, 1]);
        assert_eq!(
            verdict(&mut lru, &grid, &topo, 0),
            StrategyVerdict::RemoteRead
        );
    }
}
