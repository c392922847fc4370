//! Command-line front end: `run`, `compare`, `mine`, `synth-distribution`
//! and `validate`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::distribution::synthesize;
use crate::engine::EventLog;
use crate::metrics::MetricReport;
use crate::mining::{
    mine_mfcp, parse_transactions, BinaryContext, MiningThresholds, DEFAULT_MAX_CANDIDATES,
};
use crate::report::{comparison_table, csv_table, timeseries_csv, RunManifest, RunReport};
use crate::scenario::{DistributionConfig, ScenarioConfig, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "gridrep", version, about = "Data-grid replication simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario (or a parameter sweep) and write its reports.
    Run(RunArgs),
    /// Compare two JSON reports side by side.
    Compare { a: PathBuf, b: PathBuf },
    /// Mine maximal frequent correlated patterns from a transaction file.
    Mine(MineArgs),
    /// Print a scenario whose initial distribution aims at a target DisQ.
    SynthDistribution(SynthArgs),
    /// Check a scenario file without running it.
    Validate { config: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    /// Sweep a parameter: `key=v1,v2,...`. Repeat to sweep the cartesian
    /// product.
    #[arg(long = "param", value_name = "KEY=VALUES")]
    pub params: Vec<String>,
    /// Scenarios run in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also write the event log.
    #[arg(long)]
    pub dump_log: bool,
    /// Also write per-period metrics.
    #[arg(long)]
    pub timeseries: bool,
    /// Recompute metrics from an event log instead of simulating.
    #[arg(long, requires = "from_log")]
    pub metrics_only: bool,
    #[arg(long, requires = "metrics_only")]
    pub from_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// One transaction per line, items as whitespace-separated integers.
    pub transactions: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub minsupp: f64,
    #[arg(long, default_value_t = 0.5)]
    pub min_all_confidence: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_CANDIDATES)]
    pub max_candidates: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub target_disq: f64,
    /// Upper bound on replicas added.
    #[arg(long, default_value_t = usize::MAX)]
    pub extra_replicas: usize,
}

/// Parses `args` and executes the command, writing human output to `out`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Run(args) => run(args, out),
        Command::Compare { a, b } => {
            let a = load_report(&a)?;
            let b = load_report(&b)?;
            write!(out, "{}", comparison_table(&a.metrics, &b.metrics))?;
            Ok(())
        }
        Command::Mine(args) => mine(args, out),
        Command::SynthDistribution(args) => synth(args, out),
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let scenario = cfg
                .build()
                .with_context(|| format!("{}: invalid scenario", config.display()))?;
            writeln!(
                out,
                "ok: {} sites, {} files, {} jobs, digest {}",
                scenario.topology.site_count(),
                scenario.initial.files().len(),
                scenario.jobs.len(),
                cfg.digest()
            )?;
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path).with_context(|| format!("{}: cannot load scenario", path.display()))
}

fn load_report(path: &Path) -> Result<RunReport> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    RunReport::from_json(&text).with_context(|| format!("{}: not a report", path.display()))
}

/// Splits on commas outside brackets and quotes.
fn split_values(s: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quoted = false;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '"' => quoted = !quoted,
            '[' | '{' if !quoted => depth += 1,
            ']' | '}' if !quoted => depth -= 1,
            ',' if !quoted && depth == 0 => {
                parts.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    parts.push(cur);
    parts.into_iter().map(|p| p.trim().to_owned()).collect()
}

/// Cartesian product of `key=v1,v2` sweeps as lists of `key=v` overrides.
pub fn expand_sweep(params: &[String]) -> Result<Vec<Vec<String>>> {
    let mut combos: Vec<Vec<String>> = vec![Vec::new()];
    for p in params {
        let Some((key, values)) = p.split_once('=') else {
            bail!("bad --param {p:?}: expected key=v1,v2,...");
        };
        let values = split_values(values);
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push(format!("{}={v}", key.trim()));
                    c
                })
            })
            .collect();
    }
    Ok(combos)
}

fn output_dir(args: &RunArgs, cfg: &ScenarioConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("gridrep-out"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run(args: RunArgs, out: &mut dyn Write) -> Result<()> {
    let mut base = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    let dir = output_dir(&args, &base);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;

    if let Some(log_path) = &args.from_log {
        let scenario = base.build().context("invalid scenario")?;
        let text = fs::read_to_string(log_path)
            .with_context(|| format!("cannot read {}", log_path.display()))?;
        let log = EventLog::parse(&text)?;
        let metrics = MetricReport::compute(
            &scenario.topology,
            &scenario.initial,
            &log,
            scenario.initial_disq()?,
        )?;
        let report = RunReport::new(&base, metrics);
        write_file(
            &dir.join(format!("{}.report.json", base.name)),
            &report.to_json(),
        )?;
        write!(out, "{}", report.to_json())?;
        return Ok(());
    }

    let combos = expand_sweep(&args.params)?;
    let configs: Vec<ScenarioConfig> = combos
        .iter()
        .map(|c| base.with_overrides(c))
        .collect::<Result<_, _>>()?;
    let sweep = configs.len() > 1;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()?;
    let results: Vec<Result<RunReport>> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let stem = if sweep {
                    format!("{}-{i}", cfg.name)
                } else {
                    cfg.name.clone()
                };
                let started = Instant::now();
                let scenario = cfg
                    .build()
                    .with_context(|| format!("{stem}: invalid scenario"))?;
                let result = scenario
                    .run(args.timeseries)
                    .with_context(|| format!("{stem}: run failed"))?;
                let report = RunReport::new(cfg, result.report.clone());
                let manifest = RunManifest::new(cfg, &result, started.elapsed().as_millis());
                write_file(&dir.join(format!("{stem}.report.json")), &report.to_json())?;
                write_file(
                    &dir.join(format!("{stem}.manifest.json")),
                    &manifest.to_json(),
                )?;
                if args.dump_log {
                    write_file(
                        &dir.join(format!("{stem}.events.log")),
                        &result.output.log.dump(),
                    )?;
                }
                if args.timeseries {
                    write_file(
                        &dir.join(format!("{stem}.timeseries.csv")),
                        &timeseries_csv(&result.periods),
                    )?;
                }
                Ok(report)
            })
            .collect()
    });
    let reports: Vec<RunReport> = results.into_iter().collect::<Result<_>>()?;
    let table = csv_table(&reports);
    write_file(&dir.join(format!("{}.csv", base.name)), &table)?;
    write!(out, "{table}")?;
    Ok(())
}

fn mine(args: MineArgs, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&args.transactions)
        .with_context(|| format!("cannot read {}", args.transactions.display()))?;
    let rows = parse_transactions(&text)?;
    let thresholds = MiningThresholds::new(args.minsupp, args.min_all_confidence)?
        .with_max_candidates(args.max_candidates);
    let patterns = mine_mfcp(&BinaryContext::from_transactions(&rows), &thresholds)?;
    writeln!(
        out,
        "# {} maximal patterns over {} transactions",
        patterns.len(),
        rows.len()
    )?;
    for p in patterns {
        writeln!(out, "{p}")?;
    }
    Ok(())
}

fn synth(args: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    cfg.distribution = DistributionConfig::default();
    let scenario = cfg.build().context("invalid scenario")?;
    let synth = synthesize(&scenario, args.target_disq, args.extra_replicas)?;
    cfg.distribution.replicas = synth.replicas;
    writeln!(
        out,
        "# best-effort distribution: target DisQ {}, predicted {:.4}",
        synth.target_disq, synth.predicted_disq
    )?;
    write!(out, "{}", cfg.to_toml()?)?;
    Ok(())
}
