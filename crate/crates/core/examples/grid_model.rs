// Topology, replica catalog and availability-aware replica selection.

use gridrep::grid::{
    best_replica_site, FileId, FileSpec, GridState, GridTopology, SiteId, SiteSpec, SiteStats,
};

pub fn run_example() -> anyhow::Result<()> {
    let sites = (0..4)
        .map(|i| SiteSpec {
            id: SiteId(i),
            capacity_mb: 1000.0,
            failure_profile: 0.0,
        })
        .collect();
    let mut bw = vec![vec![10.0; 4]; 4];
    bw[0][2] = 100.0;
    bw[2][0] = 100.0;
    let topo = GridTopology::new(sites, bw)?;

    let files = (0..3)
        .map(|i| FileSpec {
            id: FileId(i),
            size_mb: 250.0,
        })
        .collect();
    let mut grid = GridState::new(&topo, files, &[SiteId(1), SiteId(1), SiteId(3)])?;
    grid.place_replica(FileId(0), SiteId(2))?;

    let best = best_replica_site(FileId(0), SiteId(0), grid.catalog(), &topo)?;
    println!(
        "S0 fetches F0 from {best} in {} ms",
        topo.transfer_ms(250.0, best, SiteId(0))
    );
    assert_eq!(best, SiteId(2));

    let stats = SiteStats {
        site_requests: 10,
        failures: 2,
    };
    println!(
        "availability after 2 failures in 10 requests: {}",
        stats.availability()
    );
    println!("storage fill: {:.1}%", grid.storage().fill_pct());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
