//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so every line is printed; exits non-zero if any fails.

mod common;

use std::cell::RefCell;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::{desk_config, small_config, OracleCase};
use gridrep::distribution::synthesize;
use gridrep::engine::{replay_catalog, Event, EventKind, EventLog};
use gridrep::metrics::{
    correct_metric, disq, enu, hit_ratio, round_half_up, AccessCounts, AccessLedger,
    CorrectionSign, MetricReport,
};
use gridrep::mining::{mine_mfcp, BinaryContext, MiningThresholds};
use gridrep::report::{comparison_table, RunReport};
use gridrep::{RunResult, ScenarioConfig};

thread_local! {
    /// DisQ of every run made by the suite, for the bounds check.
    static SEEN_DISQ: RefCell<Vec<(String, f64)>> = const { RefCell::new(Vec::new()) };
}

fn run(cfg: &ScenarioConfig) -> RunResult {
    let result = cfg
        .build()
        .expect("scenario builds")
        .run(false)
        .expect("scenario runs");
    SEEN_DISQ.with(|s| {
        let mut s = s.borrow_mut();
        s.push((
            format!("{} {}", cfg.name, cfg.strategy.label()),
            result.report.disq,
        ));
        s.push((format!("{} initial", cfg.name), result.report.initial_disq));
    });
    result
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn red_extremes() -> Outcome {
    let started = Instant::now();
    let base = ScenarioConfig::from_toml(
        r#"
name = "red-extremes"
seed = 3
[topology]
site_count = 20
capacity_mb = 5000.0
failure_profile = 0.05
[files]
count = 50
size_mb = 100.0
[jobs]
count = 200
requests_per_job = 10
universe_size = 10
pattern = { kind = "random" }
"#,
    )
    .unwrap();
    let total_mb = base.files.size_mb * f64::from(base.files.count);
    let none = run(&base.with_param("strategy", "no_replication").unwrap()).report;
    let lru_cfg = base.with_param("strategy", "lru").unwrap();
    let lru = run(&lru_cfg).report;
    let secs = started.elapsed().as_secs_f64();
    outcome(
        none.red == 0.0 && lru.red == 1.0 && lru_cfg.topology.capacity_mb >= total_mb && secs < 5.0,
        format!(
            "RED no_replication={} lru={} (capacity {} >= {} MB), {secs:.2}s",
            none.red, lru.red, lru_cfg.topology.capacity_mb, total_mb
        ),
    )
}

fn correction_arithmetic() -> Outcome {
    let rt_cases = [
        (3314.0, 0.2, 3976.0),
        (2840.0, 0.4, 3976.0),
        (2495.0, 0.6, 3992.0),
        (2148.0, 0.8, 3866.0),
    ];
    let enu_cases = [(0.43, 0.2, 0.51), (0.30, 0.8, 0.54)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (rt, d, want) in rt_cases {
        let got = round_half_up(correct_metric(rt, d, CorrectionSign::Inverse), 0);
        pass &= (got - want).abs() <= 1.0;
        parts.push(format!("{rt}@{d}->{got}"));
    }
    for (e, d, want) in enu_cases {
        let got = correct_metric(e, d, CorrectionSign::Inverse);
        pass &= (got - want).abs() <= 0.01 + 1e-12;
        parts.push(format!("{e}@{d}->{got:.4}"));
    }
    outcome(pass, parts.join(" "))
}

fn printed_pct(table: &str, metric: &str) -> f64 {
    let line = table
        .lines()
        .find(|l| l.split_whitespace().next() == Some(metric))
        .expect("metric row present");
    line.split_whitespace()
        .last()
        .unwrap()
        .trim_end_matches('%')
        .parse()
        .expect("percentage")
}

fn performance_difference_formula() -> Outcome {
    let report = |rt: f64, enu: f64| MetricReport {
        jobs: 100,
        rt_mean_ms: rt,
        enu,
        enu_exceeds_one: false,
        hit_ratio: 0.0,
        local_accesses: 0,
        remote_accesses: 0,
        aborted_requests: 0,
        replication_count: 0,
        deletion_count: 0,
        storage_fill_pct: 0.0,
        rqd_files: 0.0,
        rqd_sites: 0.0,
        red: 0.0,
        disq: 0.0,
        initial_disq: 0.0,
        correct_rt_ms: rt,
        correct_enu: enu,
    };
    let table = comparison_table(&report(4155.0, 0.46), &report(2412.0, 0.30));
    let rt = printed_pct(&table, "rt_mean_ms");
    let enu = printed_pct(&table, "enu");
    let rt_ok = (rt - 41.90).abs() <= 0.01 + 1e-9;
    let enu_ok = (enu - 34.70).abs() <= 0.1 + 1e-9;
    outcome(
        rt_ok && enu_ok,
        format!(
            "RT prints {rt:.2}% (want 41.90 +/- 0.01: {}), ENU prints {enu:.2}% (want 34.70 +/- 0.1: {})",
            if rt_ok { "ok" } else { "off" },
            if enu_ok { "ok" } else { "off" }
        ),
    )
}

const ORACLE_CASES: u64 = 200;

fn mined(ctx: &BinaryContext, t: &MiningThresholds) -> Vec<(Vec<u32>, usize)> {
    mine_mfcp(ctx, t)
        .expect("mining succeeds")
        .into_iter()
        .map(|p| (p.items, p.support.count))
        .collect()
}

fn miner_oracle() -> Outcome {
    let started = Instant::now();
    let mut mismatches = 0;
    let mut patterns = 0;
    for seed in 0..ORACLE_CASES {
        let case = OracleCase::seeded(seed);
        let t = MiningThresholds::new(case.minsupp(), case.min_conf()).unwrap();
        let got: std::collections::BTreeSet<Vec<u32>> =
            mined(&BinaryContext::from_transactions(&case.rows), &t)
                .into_iter()
                .map(|(i, _)| i)
                .collect();
        let want = case.maximal();
        patterns += want.len();
        if got != want {
            mismatches += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 60.0,
        format!("{ORACLE_CASES} contexts, {patterns} maximal patterns, {mismatches} mismatches, {secs:.2}s"),
    )
}

fn all_confidence_properties() -> Outcome {
    let mut subset_failures = 0;
    let mut padding_failures = 0;
    for seed in 0..ORACLE_CASES {
        let case = OracleCase::seeded(seed);
        let n = case.rows.len();
        let ctx = BinaryContext::from_transactions(&case.rows);
        let t = MiningThresholds::new(case.minsupp(), case.min_conf()).unwrap();
        let result = mined(&ctx, &t);
        for (items, _) in &result {
            for mask in 1u32..(1 << items.len()) {
                let sub: Vec<u32> = items
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &x)| x)
                    .collect();
                if !case.passes(&sub) {
                    subset_failures += 1;
                }
            }
        }
        let extra = 1 + (seed as usize % 25);
        let count = t.min_count(n);
        let padded_t =
            MiningThresholds::new(count as f64 / (n + extra) as f64, case.min_conf()).unwrap();
        if mined(&ctx.padded(extra), &padded_t) != result {
            padding_failures += 1;
        }
    }
    outcome(
        subset_failures == 0 && padding_failures == 0,
        format!("{subset_failures} subsets failing a threshold, {padding_failures} contexts changed by empty-row padding"),
    )
}

fn metric_identities() -> Outcome {
    let counts = AccessCounts {
        local: 8646,
        remote: 594,
        replications: 159,
        ..AccessCounts::default()
    };
    let e = enu(&counts);
    let h = hit_ratio(&counts);
    let none = run(&desk_config("sequential", 1)
        .with_param("strategy", "no_replication")
        .unwrap())
    .report;
    let pass = (e - 0.0815).abs() <= 0.0005
        && (h - 0.9199).abs() <= 0.0005
        && h <= 1.0
        && none.hit_ratio == 0.0;
    outcome(
        pass,
        format!(
            "ENU {e:.5}, hit ratio {h:.5}, no_replication hit ratio {}",
            none.hit_ratio
        ),
    )
}

fn replication_counts() -> Outcome {
    let mut failures = Vec::new();
    let mut margin = u64::MAX;
    for pattern in ["sequential", "random"] {
        for seed in 1..=10 {
            let cfg = desk_config(pattern, seed);
            let none = run(&cfg.with_param("strategy", "no_replication").unwrap()).report;
            let lru = run(&cfg.with_param("strategy", "lru").unwrap()).report;
            let rscp = run(&cfg.with_param("strategy", "rscp").unwrap()).report;
            margin = margin.min(lru.replication_count.saturating_sub(rscp.replication_count));
            if !(rscp.replication_count < lru.replication_count
                && rscp.hit_ratio >= none.hit_ratio
                && rscp.enu <= none.enu)
            {
                failures.push(format!(
                    "{pattern}/{seed}: rscp {} vs lru {} replications, hit {} vs {}, enu {} vs {}",
                    rscp.replication_count,
                    lru.replication_count,
                    rscp.hit_ratio,
                    none.hit_ratio,
                    rscp.enu,
                    none.enu
                ));
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("20 runs, RSCP always below LRU (smallest gap {margin} replications)")
        } else {
            failures.join("; ")
        },
    )
}

fn spread_pct(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    (max - min) / max * 100.0
}

fn correction_convergence() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/correction.toml");
    let base = ScenarioConfig::load(&path).unwrap();
    let probe = base.build().unwrap();
    let mut disqs = Vec::new();
    let mut raw = Vec::new();
    let mut corrected = Vec::new();
    for target in [0.2, 0.4, 0.6, 0.8] {
        let mut cfg = base.clone();
        cfg.distribution.replicas = synthesize(&probe, target, usize::MAX).unwrap().replicas;
        let m = run(&cfg).report;
        disqs.push(m.initial_disq);
        raw.push(m.rt_mean_ms);
        corrected.push(m.correct_rt_ms);
    }
    let increasing = disqs.windows(2).all(|w| w[0] < w[1]);
    let raw_spread = spread_pct(&raw);
    let cor_spread = spread_pct(&corrected);
    outcome(
        increasing && cor_spread < raw_spread && cor_spread <= 10.0,
        format!(
            "initial DisQ {:?}, raw RT spread {raw_spread:.2}%, corrected {cor_spread:.2}%",
            disqs
                .iter()
                .map(|d| round_half_up(*d, 3))
                .collect::<Vec<_>>()
        ),
    )
}

fn determinism() -> Outcome {
    let configs = [
        desk_config("random", 4),
        small_config(9, "rscp", 0.3),
        small_config(9, "lru", 0.3),
    ];
    let mut identical = 0;
    for cfg in &configs {
        let a = run(cfg);
        let b = run(cfg);
        let same_log = a.output.log.dump() == b.output.log.dump();
        let same_report = RunReport::new(cfg, a.report.clone()).to_json()
            == RunReport::new(cfg, b.report).to_json();
        identical += usize::from(same_log && same_report);
    }
    outcome(
        identical == configs.len(),
        format!(
            "{identical}/{} scenarios byte-identical across reruns",
            configs.len()
        ),
    )
}

/// Rewrites every remote read of `file` by `site` as a local read.
fn localize(log: &EventLog, site: gridrep::SiteId, file: gridrep::FileId) -> EventLog {
    let mut out = EventLog::new();
    for &e in log.events() {
        if e.kind == EventKind::RemoteAccess && e.requester == site && e.file == file {
            out.push(Event {
                kind: EventKind::LocalAccess,
                holder: site,
                ..e
            });
        } else {
            out.push(e);
        }
    }
    out
}

fn disq_bounds_and_monotonicity() -> Outcome {
    let mut checked = 0;
    let mut decreases = Vec::new();
    for cfg in [
        desk_config("random", 2)
            .with_param("strategy", "no_replication")
            .unwrap(),
        small_config(5, "no_replication", 0.0),
    ] {
        let scenario = cfg.build().unwrap();
        let result = run(&cfg);
        let log = &result.output.log;
        let n = scenario.topology.site_count();
        let before = disq(
            &result.output.final_grid,
            &AccessLedger::from_log(log, n).unwrap(),
            &scenario.topology,
        );
        let streams: std::collections::BTreeSet<_> = log
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::RemoteAccess)
            .map(|e| (e.requester, e.file))
            .collect();
        for (site, file) in streams {
            let mut initial = scenario.initial.clone();
            if initial.place_replica(file, site).is_err() {
                continue;
            }
            let moved = localize(log, site, file);
            let grid = replay_catalog(&initial, &moved).unwrap();
            let after = disq(
                &grid,
                &AccessLedger::from_log(&moved, n).unwrap(),
                &scenario.topology,
            );
            checked += 1;
            if after < before {
                decreases.push(format!("{site}/{file}: {before} -> {after}"));
            }
        }
    }
    let seen = SEEN_DISQ.with(|s| s.borrow().clone());
    let out_of_range: Vec<_> = seen
        .iter()
        .filter(|(_, d)| !(0.0..=1.0).contains(d))
        .collect();
    outcome(
        out_of_range.is_empty() && decreases.is_empty() && checked > 0,
        format!(
            "{} DisQ values all in [0,1]: {}; {checked} localized streams, {} decreases",
            seen.len(),
            out_of_range.is_empty(),
            decreases.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("RED extremes", red_extremes),
        ("correction arithmetic", correction_arithmetic),
        (
            "performance-difference formula",
            performance_difference_formula,
        ),
        ("miner oracle equivalence", miner_oracle),
        ("all-confidence properties", all_confidence_properties),
        ("metric identities", metric_identities),
        ("directional replication count", replication_counts),
        ("correction convergence", correction_convergence),
        ("determinism", determinism),
        ("DisQ bounds and monotonicity", disq_bounds_and_monotonicity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "[{}] {:>2}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
