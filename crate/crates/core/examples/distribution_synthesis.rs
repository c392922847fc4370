// Best-effort initial distributions aimed at a target DisQ, checked against
// the DisQ a replication-free run actually measures.

use std::path::Path;

use gridrep::distribution::synthesize;
use gridrep::ScenarioConfig;

pub fn run_example() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/desk.toml");
    let base = ScenarioConfig::load(&path)?;
    let probe = base.build()?;
    for target in [0.25, 0.5, 0.75] {
        let synth = synthesize(&probe, target, usize::MAX)?;
        let replicas: usize = synth.replicas.iter().map(|r| r.sites.len()).sum();
        let mut cfg = base.clone();
        cfg.distribution.replicas = synth.replicas;
        let measured = cfg.build()?.initial_disq()?;
        println!(
            "target {target:.2}: {replicas:>3} extra replicas, predicted {:.3}, measured {measured:.3}",
            synth.predicted_disq
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
