//! Staged benchmark run: ingest, forecast, reconcile, evaluate, report.
//!
//! Stages run one after another inside a bounded worker pool. Base
//! forecasts are cached on disk under a key derived from everything they
//! depend on, so reconciliation experiments reuse them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use hierload::evaluation::{compare_forecasters, mape_map, rmse_map, score_result, summary_row, KpiMatrix};
use hierload::forecasters::{derive_seed, run_forecaster_cv, CvInput, ForecasterConfig};
use hierload::hierarchy::{build_folds, FoldPlan};
use hierload::reconciliation::reconcile_cv;
use hierload::{ForecastResult64, SeriesForecast64};
use serde::Serialize;

use crate::config::{digest_bytes, digest_json, BenchmarkConfig, DataSource};
use crate::data::{prepare_data, write_frame_csv, PreparedData};
use crate::manifest::{RunManifest, StageRecord};
use crate::report::write_report;
use crate::summary::{
    compare_reconciliation, forecaster_report, table_row, ReconciliationReport, SeriesMaps, SummaryReport,
};

pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PERSISTENCE: &str = "persistence";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Forecast,
    Reconcile,
    Evaluate,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Forecast => "forecast",
            Stage::Reconcile => "reconcile",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    /// Present once the evaluate stage has run.
    pub summary: Option<SummaryReport>,
    pub output_dir: PathBuf,
}

/// Base forecasts of one forecaster for every series, in `S` row order.
pub struct BaseForecasts {
    pub name: String,
    pub series: Vec<SeriesForecast64>,
}

impl BaseForecasts {
    pub fn results(&self) -> Vec<ForecastResult64> {
        self.series.iter().map(|s| s.result.clone()).collect()
    }
}

/// Runs every stage up to and including `until`.
pub fn run_benchmark(cfg: &BenchmarkConfig, until: Stage) -> Result<RunOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .context("building the worker pool")?;
    pool.install(|| Runner::new(cfg)?.run(until))
}

/// Regenerates the report tree of `output_dir` from its `summary.json`.
pub fn render_report(output_dir: &Path) -> Result<Vec<PathBuf>> {
    let path = output_dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let summary: SummaryReport =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    write_report(&summary, &output_dir.join("report"))
}

struct Runner<'a> {
    cfg: &'a BenchmarkConfig,
    out: PathBuf,
    manifest: RunManifest,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a BenchmarkConfig) -> Result<Self> {
        let out = cfg.output_dir.clone();
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self { cfg, out, manifest: RunManifest::new(cfg.hash()) })
    }

    /// Times `f`, records its digests, and on failure writes the partial
    /// manifest before returning an error naming the stage.
    fn stage<R>(
        &mut self,
        stage: Stage,
        input_digest: String,
        f: impl FnOnce(&Path) -> Result<(R, String, bool)>,
    ) -> Result<R> {
        log::info!("stage {} started", stage.name());
        let t0 = Instant::now();
        match f(&self.out) {
            Ok((value, output_digest, cached)) => {
                let seconds = t0.elapsed().as_secs_f64();
                log::info!("stage {} finished in {seconds:.1} s{}", stage.name(), if cached { " (cached)" } else { "" });
                self.manifest.stages.push(StageRecord {
                    name: stage.name().to_string(),
                    seconds,
                    input_digest,
                    output_digest,
                    cached,
                });
                Ok(value)
            }
            Err(e) => {
                self.manifest.failed_stage = Some(stage.name().to_string());
                if let Err(w) = self.manifest.write(&self.out.join(MANIFEST_FILE)) {
                    log::warn!("could not write the partial manifest: {w:#}");
                }
                Err(e.context(format!("stage `{}` failed", stage.name())))
            }
        }
    }

    fn run(mut self, until: Stage) -> Result<RunOutcome> {
        let cfg = self.cfg;
        let mut summary = None;

        let ingest_in = ingest_digest(cfg);
        let (data, data_digest) = self.stage(Stage::Ingest, ingest_in, |out| {
            let (data, digest) = ingest(cfg, out)?;
            Ok(((data, digest.clone()), digest, false))
        })?;

        if until >= Stage::Forecast {
            let forecast_in = digest_json(&(&data_digest, &cfg.embedding, &cfg.folds, &cfg.quantiles, &cfg.forecasters));
            let (forecasts, forecast_digest) = self.stage(Stage::Forecast, forecast_in, |out| {
                let plan = build_folds(
                    data.frame.whole_days(),
                    &cfg.embedding,
                    cfg.folds.k,
                    data.frame.steps_per_day(),
                    cfg.folds.test_rows,
                )?;
                let (f, digests, cached) = forecast_all(cfg, &data, &plan, &data_digest, out)?;
                let d = digest_json(&digests);
                Ok(((f, d.clone()), d, cached))
            })?;

            if until >= Stage::Reconcile {
                let reconcile_in = digest_json(&(&forecast_digest, &cfg.reconciliation));
                let (base_name, reconciled, reconcile_digest) = self.stage(Stage::Reconcile, reconcile_in, |_| {
                    let base_name = resolve_base(cfg, &forecasts, data.frame.steps_per_day())?;
                    let reconciled = reconcile_all(cfg, &data, &forecasts[&base_name])?;
                    let d = digest_json(&(&base_name, &reconciled));
                    Ok(((base_name, reconciled, d.clone()), d, false))
                })?;

                if until >= Stage::Evaluate {
                    let evaluate_in = digest_json(&(&forecast_digest, &reconcile_digest, &cfg.evaluation));
                    let report = self.stage(Stage::Evaluate, evaluate_in, |out| {
                        let report = evaluate(cfg, &data, &forecasts, &base_name, &reconciled, out)?;
                        let bytes = report.to_json();
                        let path = out.join(SUMMARY_FILE);
                        fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
                        Ok((report, digest_bytes(bytes.as_bytes()), false))
                    })?;

                    if until >= Stage::Report {
                        let report_in = digest_bytes(report.to_json().as_bytes());
                        self.stage(Stage::Report, report_in, |out| {
                            let files = write_report(&report, &out.join("report"))?;
                            Ok(((), digest_files(&files)?, false))
                        })?;
                    }
                    summary = Some(report);
                }
            }
        }

        self.manifest.completed = true;
        self.manifest.write(&self.out.join(MANIFEST_FILE))?;
        Ok(RunOutcome { manifest: self.manifest, summary, output_dir: self.out })
    }
}

/// Digest of everything the ingested frame depends on, input files
/// included. Unreadable files are left for the ingest stage to report.
fn ingest_digest(cfg: &BenchmarkConfig) -> String {
    let mut parts = vec![digest_json(&(cfg.seed, &cfg.data, &cfg.hierarchy))];
    if let DataSource::Dataset(d) = &cfg.data {
        for path in std::iter::once(&d.meters).chain(d.nwp.as_ref()) {
            parts.push(fs::read(path).map_or_else(|_| "unreadable".to_string(), |b| digest_bytes(&b)));
        }
    }
    digest_json(&parts)
}

fn ingest(cfg: &BenchmarkConfig, out: &Path) -> Result<(PreparedData, String)> {
    let data = prepare_data(cfg)?;
    let dir = out.join("data");
    fs::create_dir_all(&dir)?;
    let mut columns = data.series.clone();
    columns.extend(data.frame.names().iter().filter(|n| !data.series.contains(n)).cloned());
    let path = dir.join("frame.csv");
    write_frame_csv(&data.frame, &columns, &path)?;
    if let Some(report) = &data.cleaning {
        fs::write(dir.join("cleaning.json"), report.to_json())?;
    }
    let digest = digest_bytes(&fs::read(&path)?);
    Ok((data, digest))
}

/// Stable per-method stream so adding a forecaster leaves the others' draws unchanged.
fn method_stream(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Serialize)]
struct CacheKey<'a> {
    version: &'a str,
    data: &'a str,
    seed: u64,
    plan: &'a FoldPlan,
    embedding: &'a hierload::hierarchy::EmbeddingSpec,
    quantiles: &'a [f64],
    forecaster: &'a ForecasterConfig,
}

/// Forecasters to run: persistence first (always, since every score is
/// normalized by it), then the configured ones in order.
fn forecaster_list(cfg: &BenchmarkConfig) -> Vec<ForecasterConfig> {
    let mut list = vec![ForecasterConfig::Persistence];
    list.extend(cfg.forecasters.iter().filter(|f| f.name() != PERSISTENCE).cloned());
    list
}

type Forecasts = BTreeMap<String, BaseForecasts>;

fn forecast_all(
    cfg: &BenchmarkConfig,
    data: &PreparedData,
    plan: &FoldPlan,
    data_digest: &str,
    out: &Path,
) -> Result<(Forecasts, Vec<(String, String)>, bool)> {
    let cache_dir = out.join("cache");
    if cfg.cache {
        fs::create_dir_all(&cache_dir)?;
    }
    let mut all = BTreeMap::new();
    let mut digests = Vec::new();
    let mut all_cached = true;
    for fc in forecaster_list(cfg) {
        let name = fc.name().to_string();
        let seed = derive_seed(cfg.seed, method_stream(&name), 0);
        let key = digest_json(&CacheKey {
            version: env!("CARGO_PKG_VERSION"),
            data: data_digest,
            seed,
            plan,
            embedding: &cfg.embedding,
            quantiles: &cfg.quantiles,
            forecaster: &fc,
        });
        let path = cache_dir.join(format!("forecast-{name}-{}.json", &key[..16]));
        let cached = cfg.cache && path.is_file();
        let (series, bytes) = if cached {
            log::info!("{name}: reusing {}", path.display());
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let series: Vec<SeriesForecast64> =
                serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
            (series, bytes)
        } else {
            log::info!("{name}: forecasting {} series", data.series.len());
            let input = CvInput { frame: &data.frame, plan, spec: &cfg.embedding, alphas: &cfg.quantiles, seed };
            let series = run_forecaster_cv(&fc, &input, &data.series).with_context(|| format!("forecaster `{name}`"))?;
            let bytes = serde_json::to_vec(&series)?;
            if cfg.cache {
                fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            }
            (series, bytes)
        };
        all_cached &= cached;
        digests.push((name.clone(), digest_bytes(&bytes)));
        all.insert(name.clone(), BaseForecasts { name, series });
    }
    Ok((all, digests, all_cached))
}

fn mean_top_rmse(f: &BaseForecasts, spd: usize) -> f64 {
    rmse_map(&f.series[0].result, spd).mean().unwrap_or(f64::INFINITY)
}

/// The configured base forecaster, or for `"best"` the configured
/// forecaster with the lowest mean RMSE on the top series.
fn resolve_base(cfg: &BenchmarkConfig, forecasts: &Forecasts, steps_per_day: usize) -> Result<String> {
    let wanted = &cfg.reconciliation.base_forecaster;
    if wanted != "best" {
        return Ok(wanted.clone());
    }
    let score = |f: &BaseForecasts| mean_top_rmse(f, steps_per_day);
    cfg.forecasters
        .iter()
        .map(|f| &forecasts[f.name()])
        .min_by(|a, b| score(a).total_cmp(&score(b)))
        .map(|f| f.name.clone())
        .context("no forecaster to reconcile")
}

type Reconciled = Vec<(String, Vec<ForecastResult64>)>;

fn reconcile_all(cfg: &BenchmarkConfig, data: &PreparedData, base: &BaseForecasts) -> Result<Reconciled> {
    let spd = data.frame.steps_per_day();
    cfg.reconciliation
        .methods
        .iter()
        .map(|m| {
            log::info!("reconciling {} with {}", base.name, m.label());
            let r = reconcile_cv(&base.series, &data.hierarchy, m, spd).with_context(|| format!("method `{}`", m.label()))?;
            Ok((m.label(), r.results))
        })
        .collect()
}

fn write_kpi_csvs(dir: &Path, series: &[String], maps: &[SeriesMaps]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, m) in series.iter().zip(maps) {
        let items: [(&str, &KpiMatrix); 5] =
            [("rmse", &m.rmse), ("mape", &m.mape), ("qs", &m.qs), ("nrmse", &m.nrmse), ("nmape", &m.nmape)];
        for (metric, map) in items {
            let path = dir.join(format!("{name}_{metric}.csv"));
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            map.write_csv(std::io::BufWriter::new(file))?;
        }
    }
    Ok(())
}

fn evaluate(
    cfg: &BenchmarkConfig,
    data: &PreparedData,
    forecasts: &Forecasts,
    base_name: &str,
    reconciled: &Reconciled,
    out: &Path,
) -> Result<SummaryReport> {
    let h = &data.hierarchy;
    let spd = data.frame.steps_per_day();
    let floor = cfg.evaluation.mape_floor;
    let persistence = forecasts[PERSISTENCE].results();
    let mut reports = Vec::new();
    let mut table = Vec::new();
    for fc in &cfg.forecasters {
        let results = forecasts[fc.name()].results();
        let (report, maps) = forecaster_report(fc.name(), &results, &persistence, h, spd, floor)?;
        write_kpi_csvs(&out.join("kpi").join(fc.name()), &data.series, &maps)?;
        table.push(table_row(fc.name(), &maps, h));
        reports.push(report);
    }
    let ranking = compare_forecasters(&table);

    let step_minutes = data.frame.step_minutes();
    let bin_steps = ((cfg.evaluation.bin_hours * 60.0 / step_minutes as f64).round() as usize).max(1);
    let base = forecasts[base_name].results();
    let mut rec_reports = Vec::new();
    for (label, results) in reconciled {
        let series = compare_reconciliation(h, &base, results, spd, bin_steps)?;
        let rmse: Vec<KpiMatrix> = results.iter().map(|r| rmse_map(r, spd)).collect();
        let mape: Vec<KpiMatrix> = results.iter().map(|r| mape_map(r, spd, floor).0).collect();
        let bottom = h.n_upper()..;
        let bm: Vec<&KpiMatrix> = mape[bottom.clone()].iter().collect();
        let br: Vec<&KpiMatrix> = rmse[bottom].iter().collect();
        let qs = results.iter().map(|r| Ok(score_result(r)?.qs)).collect::<Result<Vec<f64>>>()?;
        rec_reports.push(ReconciliationReport {
            label: label.clone(),
            summary: summary_row(label, &mape[0], &rmse[0], &bm, &br),
            series,
            qs,
        });
    }

    Ok(SummaryReport {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        steps_per_day: spd,
        step_minutes,
        horizon: cfg.embedding.horizon,
        alphas: cfg.quantiles.clone(),
        series: data.series.clone(),
        n_bottom: h.n_bottom(),
        test_rows: persistence.first().map_or(0, |r| r.rows()),
        forecasters: reports,
        table,
        ranking,
        reconciliation_base: (!reconciled.is_empty()).then(|| base_name.to_string()),
        bin_steps,
        reconciliation: rec_reports,
    })
}

fn digest_files(files: &[PathBuf]) -> Result<String> {
    let mut parts = Vec::with_capacity(files.len());
    for f in files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        parts.push((name, digest_bytes(&fs::read(f)?)));
    }
    parts.sort();
    Ok(digest_json(&parts))
}
