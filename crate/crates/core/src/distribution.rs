//! Best-effort synthesis of initial replica distributions that aim at a
//! given DisQ.
//!
//! DisQ is predicted from the jobs' demand matrix with every request served
//! by its best holder and availability taken as `1 − failure_profile`. Files
//! are visited in id order; each one gets the number of extra replicas
//! (placed at its most demanding sites first) that keeps the running mean of
//! predicted file weights closest to the target.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::grid::{FileId, GridState, GridTopology, SiteId};
use crate::metrics::AVAILABILITY_FLOOR;
use crate::scenario::{ReplicaPlacement, Scenario};
use crate::workload::{demand_matrix, WorkloadError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthesizedDistribution {
    pub replicas: Vec<ReplicaPlacement>,
    pub predicted_disq: f64,
    pub target_disq: f64,
}

/// Demand per file: requesting site -> request count.
type FileDemand = BTreeMap<SiteId, u64>;

/// Predicted weight of a file held at `holders`, or `None` with no demand.
pub fn predicted_file_weight(
    holders: &BTreeSet<SiteId>,
    demand: &FileDemand,
    topology: &GridTopology,
) -> Option<f64> {
    let mut local: BTreeMap<SiteId, f64> = BTreeMap::new();
    let mut remote: BTreeMap<SiteId, f64> = BTreeMap::new();
    for (&site, &count) in demand {
        if holders.contains(&site) {
            *local.entry(site).or_default() += count as f64;
            continue;
        }
        let Some(&best) = holders.iter().max_by(|&&a, &&b| {
            topology
                .bandwidth(site, a)
                .total_cmp(&topology.bandwidth(site, b))
                .then(b.cmp(&a))
        }) else {
            continue;
        };
        let p = (1.0 - topology.sites()[best.index()].failure_profile).max(AVAILABILITY_FLOOR);
        *remote.entry(best).or_default() += count as f64 / (topology.bandwidth(site, best) * p);
    }
    let weights: Vec<f64> = holders
        .iter()
        .filter_map(|h| {
            let l = local.get(h).copied().unwrap_or(0.0);
            let r = remote.get(h).copied().unwrap_or(0.0);
            (l + r > 0.0).then(|| l / (l + r))
        })
        .collect();
    (!weights.is_empty()).then(|| weights.iter().sum::<f64>() / weights.len() as f64)
}

/// Greedy placement aiming at `target`. At most `max_extra` replicas are
/// added over the whole grid; capacity is always respected.
pub fn synthesize(
    scenario: &Scenario,
    target: f64,
    max_extra: usize,
) -> Result<SynthesizedDistribution, WorkloadError> {
    let demand = demand_matrix(&scenario.jobs, scenario.config.seed)?;
    let mut per_file: BTreeMap<FileId, FileDemand> = BTreeMap::new();
    for (&(site, file), &count) in &demand {
        per_file.entry(file).or_default().insert(site, count);
    }
    let mut grid: GridState = scenario.initial.clone();
    let mut budget = max_extra;
    let mut sum = 0.0;
    let mut counted = 0usize;
    let mut placements = Vec::new();

    for spec in scenario.initial.files() {
        let file = spec.id;
        let Some(d) = per_file.get(&file) else {
            continue;
        };
        let base: BTreeSet<SiteId> = grid.catalog().holders(file).expect("known file").clone();
        let mut candidates: Vec<(u64, SiteId)> = d
            .iter()
            .filter(|(s, _)| !base.contains(s))
            .map(|(&s, &c)| (c, s))
            .collect();
        candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        // Option k adds the first k candidates that fit.
        let mut options = vec![(base.clone(), Vec::new())];
        let mut holders = base;
        let mut added = Vec::new();
        let mut free: BTreeMap<SiteId, f64> = BTreeMap::new();
        for &(_, s) in &candidates {
            if added.len() >= budget {
                break;
            }
            let f = free.entry(s).or_insert_with(|| grid.free(s));
            if *f + 1e-9 < spec.size_mb {
                continue;
            }
            *f -= spec.size_mb;
            holders.insert(s);
            added.push(s);
            options.push((holders.clone(), added.clone()));
        }
        let score = |w: f64| ((sum + w) / (counted + 1) as f64 - target).abs();
        let Some((_, chosen, w)) = options
            .into_iter()
            .filter_map(|(h, a)| {
                predicted_file_weight(&h, d, &scenario.topology).map(|w| (h, a, w))
            })
            .min_by(|x, y| {
                score(x.2)
                    .total_cmp(&score(y.2))
                    .then(x.1.len().cmp(&y.1.len()))
            })
        else {
            continue;
        };
        sum += w;
        counted += 1;
        for &s in &chosen {
            grid.place_replica(file, s).expect("space was checked");
        }
        budget -= chosen.len();
        if !chosen.is_empty() {
            placements.push(ReplicaPlacement {
                file,
                sites: chosen,
            });
        }
    }
    Ok(SynthesizedDistribution {
        replicas: placements,
        predicted_disq: if counted == 0 {
            0.0
        } else {
            sum / counted as f64
        },
        target_disq: target,
    })
}
