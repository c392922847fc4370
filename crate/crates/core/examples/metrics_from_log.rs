// Metrics are pure functions of the event log: dump a run, parse it back
// and recompute.

use gridrep::engine::EventLog;
use gridrep::metrics::{enu, hit_ratio, AccessCounts, MetricReport};
use gridrep::ScenarioConfig;

const SCENARIO: &str = r#"
seed = 5
strategy = "lru"
[topology]
site_count = 4
capacity_mb = 500.0
failure_profile = 0.1
[files]
count = 8
[jobs]
count = 12
requests_per_job = 5
universe_size = 4
pattern = { kind = "gaussian_walk", sigma = 1.0 }
"#;

pub fn run_example() -> anyhow::Result<()> {
    let scenario = ScenarioConfig::from_toml(SCENARIO)?.build()?;
    let run = scenario.run(false)?;
    let dump = run.output.log.dump();
    println!("{}", dump.lines().take(5).collect::<Vec<_>>().join("\n"));

    let log = EventLog::parse(&dump)?;
    let counts = AccessCounts::from_log(&log);
    println!("counts {counts:?}");
    println!(
        "enu {:.4} hit ratio {:.4}",
        enu(&counts),
        hit_ratio(&counts)
    );

    let again = MetricReport::compute(
        &scenario.topology,
        &scenario.initial,
        &log,
        run.report.initial_disq,
    )?;
    assert_eq!(again, run.report);
    println!("{}", serde_json::to_string_pretty(&again.rounded())?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
