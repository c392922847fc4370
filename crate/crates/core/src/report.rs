//! Report files: structured JSON per run, flat CSV rows, run manifests,
//! per-period time series and the side-by-side comparison table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{performance_difference, MetricReport};
use crate::scenario::{PeriodSnapshot, RunResult, ScenarioConfig};

/// Bumped whenever CSV columns change; new columns are only ever appended.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// CSV column order.
pub const CSV_COLUMNS: [&str; 23] = [
    "schema_version",
    "scenario",
    "strategy",
    "seed",
    "jobs",
    "rt_mean_ms",
    "enu",
    "enu_exceeds_one",
    "hit_ratio",
    "local_accesses",
    "remote_accesses",
    "aborted_requests",
    "replication_count",
    "deletion_count",
    "storage_fill_pct",
    "rqd_files",
    "rqd_sites",
    "red",
    "disq",
    "initial_disq",
    "correct_rt_ms",
    "correct_enu",
    "config_digest",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub strategy: String,
    pub seed: u64,
    pub config_digest: String,
    /// Full-precision values.
    pub metrics: MetricReport,
}

impl RunReport {
    pub fn new(config: &ScenarioConfig, metrics: MetricReport) -> Self {
        RunReport {
            scenario: config.name.clone(),
            strategy: config.strategy.label().to_owned(),
            seed: config.seed,
            config_digest: config.digest(),
            metrics,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// One CSV row in [`CSV_COLUMNS`] order, with rounded values.
    pub fn csv_row(&self) -> String {
        let m = self.metrics.rounded();
        let fields = [
            CSV_SCHEMA_VERSION.to_string(),
            csv_escape(&self.scenario),
            csv_escape(&self.strategy),
            self.seed.to_string(),
            m.jobs.to_string(),
            m.rt_mean_ms.to_string(),
            m.enu.to_string(),
            m.enu_exceeds_one.to_string(),
            m.hit_ratio.to_string(),
            m.local_accesses.to_string(),
            m.remote_accesses.to_string(),
            m.aborted_requests.to_string(),
            m.replication_count.to_string(),
            m.deletion_count.to_string(),
            m.storage_fill_pct.to_string(),
            m.rqd_files.to_string(),
            m.rqd_sites.to_string(),
            m.red.to_string(),
            m.disq.to_string(),
            m.initial_disq.to_string(),
            m.correct_rt_ms.to_string(),
            m.correct_enu.to_string(),
            self.config_digest.clone(),
        ];
        fields.join(",")
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

/// Header plus one row per report.
pub fn csv_table(reports: &[RunReport]) -> String {
    let mut out = csv_header() + "\n";
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Everything needed to reproduce a run, plus when and with what it ran.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub wall_clock_ms: u128,
    pub config: ScenarioConfig,
    pub periods: Vec<PeriodSnapshot>,
}

impl RunManifest {
    pub fn new(config: &ScenarioConfig, run: &RunResult, wall_clock_ms: u128) -> Self {
        RunManifest {
            config_digest: config.digest(),
            seed: config.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            wall_clock_ms,
            config: config.clone(),
            periods: run.periods.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Per-period metrics, one row per boundary.
pub fn timeseries_csv(periods: &[PeriodSnapshot]) -> String {
    let mut out = String::from(
        "period,jobs_completed,clock_ms,rt_mean_ms,enu,hit_ratio,replication_count,storage_fill_pct,rqd_files,rqd_sites,red,disq\n",
    );
    for p in periods {
        let m = p.metrics.rounded();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            p.period,
            p.jobs_completed,
            p.clock_ms,
            m.rt_mean_ms,
            m.enu,
            m.hit_ratio,
            m.replication_count,
            m.storage_fill_pct,
            m.rqd_files,
            m.rqd_sites,
            m.red,
            m.disq
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// One line of a comparison: values of A and B and `(A − B) / A × 100`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub metric: &'static str,
    pub a: f64,
    pub b: f64,
    pub diff_pct: f64,
}

pub fn comparison_rows(a: &MetricReport, b: &MetricReport) -> Vec<ComparisonRow> {
    let pairs = [
        ("rt_mean_ms", a.rt_mean_ms, b.rt_mean_ms),
        ("correct_rt_ms", a.correct_rt_ms, b.correct_rt_ms),
        ("enu", a.enu, b.enu),
        ("correct_enu", a.correct_enu, b.correct_enu),
        ("hit_ratio", a.hit_ratio, b.hit_ratio),
        ("disq", a.disq, b.disq),
        ("initial_disq", a.initial_disq, b.initial_disq),
        ("red", a.red, b.red),
        (
            "replication_count",
            a.replication_count as f64,
            b.replication_count as f64,
        ),
    ];
    pairs
        .into_iter()
        .map(|(metric, a, b)| ComparisonRow {
            metric,
            a,
            b,
            diff_pct: performance_difference(a, b),
        })
        .collect()
}

/// Plain-text table of [`comparison_rows`].
pub fn comparison_table(a: &MetricReport, b: &MetricReport) -> String {
    let mut out = format!("{:<18} {:>14} {:>14} {:>10}\n", "metric", "a", "b", "diff");
    for row in comparison_rows(a, b) {
        let diff = if row.diff_pct.is_nan() {
            "n/a".to_owned()
        } else {
            format!("{:.2}%", row.diff_pct)
        };
        writeln!(
            out,
            "{:<18} {:>14} {:>14} {:>10}",
            row.metric,
            trim(row.a),
            trim(row.b),
            diff
        )
        .expect("writing to a String cannot fail");
    }
    out
}

fn trim(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_owned()
}
