use hierload_bench::config::BenchmarkConfig;
use hierload_bench::pipeline::{render_report, run_benchmark, Stage, MANIFEST_FILE, SUMMARY_FILE};
use hierload_bench::summary::compare_reconciliation;
use hierload_bench::{RunManifest, SummaryReport};

fn config(toml: &str, out: &std::path::Path) -> BenchmarkConfig {
    let mut cfg = BenchmarkConfig::from_toml_str(toml).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

const SMALL: &str = r#"
seed = 11
[data]
source = "synthetic"
n_bottom = 4
days = 24
[hierarchy]
group_counts = [2]
[folds]
k = 4
[[forecasters]]
method = "persistence"
[[forecasters]]
method = "armax"
[[forecasters]]
method = "knn"
[reconciliation]
base_forecaster = "best"
"#;

#[test]
fn persistence_only_run_scores_one_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"
        [data]
        source = "synthetic"
        n_bottom = 24
        days = 60
        [[forecasters]]
        method = "persistence"
        [reconciliation]
        base_forecaster = "persistence"
        methods = [{ method = "ols" }]
        "#,
        dir.path(),
    );
    let out = run_benchmark(&cfg, Stage::Report).unwrap();
    let s = out.summary.unwrap();
    assert_eq!(s.series.len(), 31);
    let p = s.forecaster("persistence").unwrap();
    for k in &p.series {
        assert_eq!(k.mean_nrmse, Some(1.0), "{}", k.series);
        assert_eq!(k.mean_nmape, Some(1.0), "{}", k.series);
        assert_eq!(k.nqs, Some(1.0), "{}", k.series);
        assert!(k.nrmse_profile.iter().all(|v| *v == Some(1.0)));
    }
    assert!(p.top_nrmse_map.iter().all(|c| c.value == 1.0));
    assert_eq!(s.reconciliation_base.as_deref(), Some("persistence"));
    assert!(out.manifest.completed);
    assert!(dir.path().join("report/fig4_top_nmape_map.csv").is_file());
    assert!(dir.path().join("kpi/persistence/total_rmse.csv").is_file());
}

#[test]
fn identical_configs_give_identical_digests() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = config(SMALL, a.path());
    ca.cache = false;
    let cb = config(SMALL, b.path());
    let ra = run_benchmark(&ca, Stage::Report).unwrap();
    let rb = run_benchmark(&cb, Stage::Report).unwrap();
    assert_eq!(ra.manifest.digests(), rb.manifest.digests());
    let ja = std::fs::read(a.path().join(SUMMARY_FILE)).unwrap();
    let jb = std::fs::read(b.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(ja, jb);

    // A rerun in place reuses the cached base forecasts and changes nothing.
    let rc = run_benchmark(&cb, Stage::Report).unwrap();
    assert!(rc.manifest.stage("forecast").unwrap().cached);
    assert_eq!(rb.manifest.digests(), rc.manifest.digests());

    // Report files depend on summary.json alone.
    let fig = b.path().join("report/fig8_bottom_reduction_bins.csv");
    let before = std::fs::read(&fig).unwrap();
    std::fs::remove_dir_all(b.path().join("report")).unwrap();
    render_report(b.path()).unwrap();
    assert_eq!(std::fs::read(&fig).unwrap(), before);
}

#[test]
fn four_forecaster_run_fills_the_summary_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"
        seed = 5
        [data]
        source = "synthetic"
        n_bottom = 4
        days = 24
        [hierarchy]
        group_counts = [2]
        [folds]
        k = 4
        [[forecasters]]
        method = "armax"
        [[forecasters]]
        method = "holt_winters"
        [[forecasters]]
        method = "knn"
        [[forecasters]]
        method = "boosted_trees"
        n_trees = 8
        max_leaves = 7
        feature_fraction = 0.2
        row_stride = 3
        max_bins = 31
        "#,
        dir.path(),
    );
    let s = run_benchmark(&cfg, Stage::Evaluate).unwrap().summary.unwrap();
    let names: Vec<&str> = s.table.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(names, ["armax", "holt_winters", "knn", "boosted_trees"]);
    for row in &s.table {
        for v in row.cells() {
            let v = v.unwrap_or_else(|| panic!("empty cell for {}", row.method));
            assert!(v.is_finite() && v > 0.0);
        }
    }
    assert_eq!(s.ranking.ranks.len(), 4);
    assert!(s.ranking.ranks.iter().all(|r| r.len() == 4));
    assert_eq!(s.reconciliation.len(), 5);
    for r in &s.reconciliation {
        assert!(r.summary.cells().iter().all(Option::is_some));
    }
    // Persistence is not listed, so it is not reported, but it still runs
    // as the normalization reference.
    assert!(s.forecaster("persistence").is_none());
    assert!(s.forecasters.iter().all(|f| f.top().mean_nrmse.is_some()));
}

#[test]
fn staged_runs_stop_where_asked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL, dir.path());
    let out = run_benchmark(&cfg, Stage::Ingest).unwrap();
    assert_eq!(out.manifest.stages.len(), 1);
    assert!(out.summary.is_none());
    assert!(dir.path().join("data/frame.csv").is_file());
    assert!(!dir.path().join(SUMMARY_FILE).exists());
    let m = RunManifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.config_hash, cfg.hash());
}

#[test]
fn failing_stage_leaves_a_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let meters = dir.path().join("meters.csv");
    std::fs::write(&meters, "timestamp,a\nnot-a-date,1\n").unwrap();
    let cfg = config(
        &format!(
            r#"
            [data]
            source = "dataset"
            meters = "{}"
            n_bottom = 1
            [embedding]
            nwp_features = []
            [hierarchy]
            group_counts = []
            "#,
            meters.display()
        ),
        &dir.path().join("out"),
    );
    let err = run_benchmark(&cfg, Stage::Report).unwrap_err();
    assert!(format!("{err:#}").contains("stage `ingest` failed"), "{err:#}");
    let m = RunManifest::read(&dir.path().join("out").join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.failed_stage.as_deref(), Some("ingest"));
    assert!(!m.completed);
    assert_eq!(std::fs::read_to_string(&meters).unwrap(), "timestamp,a\nnot-a-date,1\n");
}

#[test]
fn reconciling_to_the_base_reduces_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL, dir.path());
    let out = run_benchmark(&cfg, Stage::Evaluate).unwrap();
    let s: SummaryReport = out.summary.unwrap();
    // Base forecasts as stored in the cache.
    let data = hierload_bench::data::prepare_data(&cfg).unwrap();
    let cached = std::fs::read_dir(dir.path().join("cache"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("forecast-armax"))
        .unwrap();
    let base: Vec<hierload::SeriesForecast64> = serde_json::from_slice(&std::fs::read(cached).unwrap()).unwrap();
    let results: Vec<_> = base.into_iter().map(|s| s.result).collect();
    let red = compare_reconciliation(&data.hierarchy, &results, &results, s.steps_per_day, s.bin_steps).unwrap();
    assert_eq!(red.len(), 7);
    for r in &red {
        assert_eq!(r.mean_reduction, Some(0.0));
        assert!(r.per_step.iter().all(|v| *v == Some(0.0)));
        assert_eq!(r.binned.len(), 6);
        assert!(r.binned.iter().all(|v| *v == Some(0.0)));
    }
}
