// Same jobs, same strategy, different starting distributions: raw response
// times drift apart with the initial DisQ, corrected ones much less.

use std::path::Path;

use gridrep::distribution::synthesize;
use gridrep::metrics::{correct_metric, CorrectionSign};
use gridrep::ScenarioConfig;

pub fn run_example() -> anyhow::Result<()> {
    for (rt, disq) in [(3314.0, 0.2), (2840.0, 0.4), (2495.0, 0.6), (2148.0, 0.8)] {
        let c = correct_metric(rt, disq, CorrectionSign::Inverse);
        println!("RT {rt} at DisQ {disq} -> corrected {c:.1}");
    }

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/correction.toml");
    let base = ScenarioConfig::load(&path)?;
    let probe = base.build()?;
    for target in [0.2, 0.4, 0.6, 0.8] {
        let mut cfg = base.clone();
        cfg.distribution.replicas = synthesize(&probe, target, usize::MAX)?.replicas;
        let m = cfg.build()?.run(false)?.report;
        println!(
            "initial DisQ {:.2}: RT {:>7.0} ms, corrected {:>7.0} ms",
            m.initial_disq, m.rt_mean_ms, m.correct_rt_ms
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
