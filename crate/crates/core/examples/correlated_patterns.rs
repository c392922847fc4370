// Mining maximal frequent correlated patterns, standalone and from a job x
// file access history.

use gridrep::mining::{mine_mfcp, to_binary_context, BinaryContext, MiningThresholds};
use gridrep::workload::AccessHistory;
use gridrep::{FileId, JobId, SiteId};

pub fn run_example() -> anyhow::Result<()> {
    let rows = vec![vec![1, 2], vec![1, 2], vec![1, 3], vec![3]];
    let thresholds = MiningThresholds::new(0.5, 0.6)?;
    for p in mine_mfcp(&BinaryContext::from_transactions(&rows), &thresholds)? {
        println!("{p}");
    }

    // Jobs 0 and 1 lean on files 4 and 5; job 2 only on file 7.
    let cells = [
        (JobId(0), FileId(4), 5),
        (JobId(0), FileId(5), 5),
        (JobId(1), FileId(4), 5),
        (JobId(1), FileId(5), 5),
        (JobId(1), FileId(7), 1),
        (JobId(2), FileId(7), 9),
    ];
    let history =
        AccessHistory::from_counts(SiteId(0), 0, vec![JobId(0), JobId(1), JobId(2)], cells);
    let groups = mine_mfcp(
        &to_binary_context(&history),
        &MiningThresholds::new(0.3, 0.5)?,
    )?;
    for g in &groups {
        println!("group {:?}", g.files());
    }
    assert_eq!(groups[0].files(), vec![FileId(4), FileId(5)]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
