//! Command-line front end: validate experiment configs, run them, and emit
//! machine-readable reports plus plot-ready CSV files.
//!
//! Exit codes: 0 when every non-vacuous verdict passes, 2 on a verdict
//! failure, 1 on usage or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use serde::Serialize;

use qshift_core::experiments::{
    presets, probe_csv_name, run_experiment, write_probe_csv, ConvergenceReport, ExperimentConfig,
    ProbeVerdict, REPORT_FORMAT_VERSION,
};

/// Environment variable overriding the worker count (the `--workers` flag
/// still wins). Defaults to the number of logical cores.
const WORKERS_ENV: &str = "QSHIFT_WORKERS";

#[derive(Parser)]
#[command(
    name = "qshift",
    version,
    about = "Monte-Carlo verification of limit laws for random shift and impulse channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment; writes report.json and one CSV per probe
    Run {
        /// Experiment config (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides the seed policy embedded in the config
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing)
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: QSHIFT_WORKERS, then logical cores)
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a config file against the schema and invariants; no computation
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the bundled preset configs, one per theorem tag
    ListPresets {
        /// Also write each preset as <name>.json into this directory
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed, out, workers } => cmd_run(&config, seed, &out, workers),
        Command::Validate { config } => {
            load_config(&config)?;
            println!("ok: {}", config.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ListPresets { dir } => cmd_list_presets(dir.as_deref()),
    }
}

/// Parse and validate a config, with the file path and JSON line/column in
/// any diagnostics.
fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("malformed config {}", path.display()))?;
    cfg.validate().with_context(|| format!("invalid config {}", path.display()))?;
    Ok(cfg)
}

/// What was run, where, and with which format version; written next to the
/// report so the CSV files inherit a version stamp.
#[derive(Serialize)]
struct RunManifest {
    config_path: String,
    master_seed: u64,
    output_dir: String,
    workers: usize,
    report_format_version: &'static str,
}

fn worker_count(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(num_threads_default)
}

fn num_threads_default() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out: &Path,
    workers: Option<usize>,
) -> anyhow::Result<ExitCode> {
    let cfg = load_config(config_path)?;
    let master_seed = seed.unwrap_or(cfg.seed_policy.master_seed);
    let workers = worker_count(workers);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot build worker pool")?;
    let started = std::time::Instant::now();
    let report = pool.install(|| run_experiment(&cfg, master_seed))?;
    let elapsed = started.elapsed();

    // all writes happen only after the run has fully aggregated
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let report_path = out.join("report.json");
    fs::write(&report_path, report.to_json()?)
        .with_context(|| format!("cannot write {}", report_path.display()))?;
    for (idx, probe) in report.probes.iter().enumerate() {
        let path = out.join(probe_csv_name(idx, probe));
        let mut buf = Vec::new();
        write_probe_csv(probe, &mut buf)?;
        fs::write(&path, buf).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let manifest = RunManifest {
        config_path: config_path.display().to_string(),
        master_seed,
        output_dir: out.display().to_string(),
        workers,
        report_format_version: REPORT_FORMAT_VERSION,
    };
    let mut manifest_text = serde_json::to_string_pretty(&manifest)?;
    manifest_text.push('\n');
    fs::write(out.join("manifest.json"), manifest_text)?;

    print_summary(&report);
    eprintln!(
        "ran {} with seed {master_seed} on {workers} workers in {:.1}s",
        cfg.theorem,
        elapsed.as_secs_f64()
    );

    if report.passed {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}

fn print_summary(report: &ConvergenceReport) {
    for (idx, probe) in report.probes.iter().enumerate() {
        let verdict = match probe.verdict {
            ProbeVerdict::Pass => "PASS",
            ProbeVerdict::Fail => "FAIL",
            ProbeVerdict::Vacuous => "VACUOUS",
        };
        println!("probe {idx:02} {}: {verdict}", probe.label);
        if let Some(reason) = &probe.vacuous_reason {
            println!("         note: {reason}");
        }
    }
    if report.wraparound_warnings > 0 {
        println!(
            "warning: {} displacement(s) pushed the packet support to the box edge; \
             results include periodic wrap-around",
            report.wraparound_warnings
        );
    }
    println!("overall: {}", if report.passed { "PASS" } else { "FAIL" });
}

fn cmd_list_presets(dir: Option<&Path>) -> anyhow::Result<ExitCode> {
    let all = presets();
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        for (name, cfg) in &all {
            let path = dir.join(format!("{name}.json"));
            let mut text = serde_json::to_string_pretty(cfg)?;
            text.push('\n');
            fs::write(&path, text)?;
        }
    }
    for (name, _) in &all {
        println!("{name}");
    }
    Ok(ExitCode::SUCCESS)
}
