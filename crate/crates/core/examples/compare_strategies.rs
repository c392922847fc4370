// Runs the bundled desk scenario under each strategy and prints the main
// metrics side by side.

use std::path::Path;

use gridrep::ScenarioConfig;

pub fn run_example() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/desk.toml");
    let base = ScenarioConfig::load(&path)?;
    println!(
        "{:<16} {:>9} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "strategy", "rt_ms", "enu", "hit", "repl", "red", "disq"
    );
    for strategy in ["no_replication", "lru", "rscp"] {
        let cfg = base.with_param("strategy", strategy)?;
        let m = cfg.build()?.run(false)?.report.rounded();
        println!(
            "{:<16} {:>9} {:>6} {:>6} {:>6} {:>6} {:>6}",
            strategy, m.rt_mean_ms, m.enu, m.hit_ratio, m.replication_count, m.red, m.disq
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
