use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hierload::ingestion::{generate_synthetic_with, CleaningOptions};
use hierload::ErrorKind;
use hierload_bench::config::{BenchmarkConfig, ConfigError, DataSource};
use hierload_bench::data::{synthetic_spec, write_frame_csv, write_nwp_csv};
use hierload_bench::pipeline::{render_report, run_benchmark, Stage, MANIFEST_FILE, SUMMARY_FILE};
use hierload_bench::SummaryReport;

/// Hierarchical load forecasting benchmark.
#[derive(Parser)]
#[command(name = "hierload", version)]
struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, short, global = true)]
    workers: Option<usize>,
    /// Ignore and do not write cached base forecasts.
    #[arg(long, global = true)]
    no_cache: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load (or generate) the measurements, build the hierarchy and write the frame.
    Ingest,
    /// Write a synthetic dataset as CSV files plus a config that reads them back.
    Synth,
    /// Run every forecaster through cross-validation.
    Forecast,
    /// Reconcile the base forecasts.
    Reconcile,
    /// Score forecasts and write summary.json and the KPI maps.
    Evaluate,
    /// Write the report tree; reuses summary.json when it matches the config.
    Report,
    /// Run every stage.
    All,
}

fn load_config(cli: &Cli) -> Result<BenchmarkConfig> {
    let mut cfg = match &cli.config {
        Some(p) => BenchmarkConfig::load(p)?,
        None => BenchmarkConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.output {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(ConfigError("--workers must be at least 1".into()).into());
        }
        cfg.workers = Some(w);
    }
    if cli.no_cache {
        cfg.cache = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth(cfg: &BenchmarkConfig) -> Result<()> {
    let spec = synthetic_spec(cfg)
        .ok_or_else(|| ConfigError("`synth` needs a synthetic data source".into()))?;
    let (frame, nwp) = generate_synthetic_with::<f64>(&spec)?;
    let dir = cfg.output_dir.join("synthetic");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_frame_csv(&frame, frame.names(), &dir.join("meters.csv"))?;
    write_nwp_csv(&nwp, &dir.join("nwp.csv"))?;
    let mut ds = BenchmarkConfig { output_dir: PathBuf::from("out"), ..cfg.clone() };
    let lead = match &cfg.data {
        DataSource::Synthetic(s) => s.nwp_min_lead_hours,
        DataSource::Dataset(d) => d.nwp_min_lead_hours,
    };
    ds.data = DataSource::Dataset(hierload_bench::config::DatasetFiles {
        meters: "meters.csv".into(),
        nwp: Some("nwp.csv".into()),
        step_minutes: frame.step_minutes(),
        meter_ids: Some(frame.names().to_vec()),
        n_bottom: frame.names().len(),
        nwp_min_lead_hours: lead,
        cleaning: CleaningOptions { min_span_days: spec.days, utc_offset_minutes: 0, ..Default::default() },
    });
    let text = toml::to_string(&ds).context("serializing the dataset config")?;
    std::fs::write(dir.join("config.toml"), text)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn summary_matches(dir: &Path, hash: &str) -> bool {
    std::fs::read_to_string(dir.join(SUMMARY_FILE))
        .ok()
        .and_then(|t| serde_json::from_str::<SummaryReport>(&t).ok())
        .is_some_and(|s| s.config_hash == hash)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let until = match cli.command {
        Command::Synth => return synth(&cfg),
        Command::Report if summary_matches(&cfg.output_dir, &cfg.hash()) => {
            let files = render_report(&cfg.output_dir)?;
            println!("wrote {} report files to {}", files.len(), cfg.output_dir.join("report").display());
            return Ok(());
        }
        Command::Ingest => Stage::Ingest,
        Command::Forecast => Stage::Forecast,
        Command::Reconcile => Stage::Reconcile,
        Command::Evaluate => Stage::Evaluate,
        Command::Report | Command::All => Stage::Report,
    };
    let outcome = run_benchmark(&cfg, until)?;
    for s in &outcome.manifest.stages {
        println!("{:<10} {:>8.1} s  {}{}", s.name, s.seconds, &s.output_digest[..16], if s.cached { "  (cached)" } else { "" });
    }
    if let Some(summary) = &outcome.summary {
        for row in &summary.table {
            let c = row.cells().map(|v| v.map_or("-".to_string(), |x| format!("{x:.3}")));
            println!("{:<14} {:>10} {:>10} {:>10} {:>10}", row.method, c[0], c[1], c[2], c[3]);
        }
        if let Some(w) = &summary.ranking.overall_winner {
            println!("best in every column: {w}");
        }
    }
    println!("manifest: {}", outcome.output_dir.join(MANIFEST_FILE).display());
    Ok(())
}

/// 2 for configuration errors, 3 for data errors, 4 for numerical failures.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(h) = cause.downcast_ref::<hierload::Error>() {
            return match h.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
