// Overriding scenario fields by dotted key and emitting one CSV row per
// variant.

use gridrep::report::{csv_table, RunReport};
use gridrep::ScenarioConfig;

const SCENARIO: &str = r#"
name = "sweep"
seed = 11
strategy = "rscp"
[rscp]
period_jobs = 20
history_window = 3
[topology]
site_count = 6
capacity_mb = 800.0
site_overrides = [{ site = 0, capacity_mb = 10000.0 }]
[files]
count = 24
master_sites = [0]
[jobs]
count = 60
origins = [1, 2, 3, 4, 5]
requests_per_job = 8
universe_size = 4
dataset_affinity = 0.9
pattern = { kind = "zipf" }
"#;

pub fn run_example() -> anyhow::Result<()> {
    let base = ScenarioConfig::from_toml(SCENARIO)?;
    let mut reports = Vec::new();
    for minsupp in ["0.1", "0.2", "0.3", "0.5"] {
        let cfg = base.with_param("rscp.minsupp", minsupp)?;
        let run = cfg.build()?.run(false)?;
        reports.push(RunReport::new(&cfg, run.report));
    }
    print!("{}", csv_table(&reports));
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
