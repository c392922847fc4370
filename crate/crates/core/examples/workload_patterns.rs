// Per-job request streams for each access pattern.

use gridrep::workload::{AccessPattern, JobSpec, RequestGenerator};
use gridrep::{FileId, JobId, SiteId};

pub fn run_example() -> anyhow::Result<()> {
    let patterns = [
        AccessPattern::Sequential,
        AccessPattern::RandomUniform,
        AccessPattern::RandomWalkGaussian { sigma: 1.5 },
        AccessPattern::RandomZipf { exponent: 0.85 },
    ];
    for pattern in patterns {
        let job = JobSpec {
            id: JobId(0),
            origin: SiteId(0),
            request_count: 12,
            pattern,
            file_universe: (0..8).map(FileId).collect(),
        };
        let files: Vec<String> = RequestGenerator::new(&job, 42)?
            .map(|f| f.0.to_string())
            .collect();
        println!("{:<14} {}", pattern.label(), files.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
