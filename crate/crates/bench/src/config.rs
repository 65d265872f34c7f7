//! Benchmark configuration: one TOML file, every key optional, unknown keys
//! rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use hierload::forecasters::{ForecasterConfig, HwConfig, KnnConfig, QuantileGrid, TreesConfig};
use hierload::hierarchy::{EmbeddingSpec, TestRows};
use hierload::ingestion::CleaningOptions;
use hierload::reconciliation::{CovarianceMethod, ReconciliationConfig, ReconciliationMethod};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Invalid or unreadable configuration; the CLI maps it to its own exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `None` lets the pool pick.
    pub workers: Option<usize>,
    /// Reuse base forecasts stored under `output_dir/cache`.
    pub cache: bool,
    pub data: DataSource,
    pub hierarchy: HierarchyPlan,
    pub embedding: EmbeddingSpec,
    pub folds: FoldConfig,
    pub quantiles: Vec<f64>,
    pub forecasters: Vec<ForecasterConfig>,
    pub reconciliation: ReconciliationSection,
    pub evaluation: EvaluationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticData),
    Dataset(DatasetFiles),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticData {
    pub n_bottom: usize,
    pub days: usize,
    pub noise_amplitude: f64,
    pub mean_kw: f64,
    /// Minimum time between a weather forecast's issue and valid time.
    pub nwp_min_lead_hours: i64,
}

impl Default for SyntheticData {
    fn default() -> Self {
        Self { n_bottom: 24, days: 90, noise_amplitude: 1.0, mean_kw: 81.0, nwp_min_lead_hours: 24 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetFiles {
    /// Wide CSV of power per meter (timestamp column first).
    pub meters: PathBuf,
    /// CSV of weather forecasts (`valid,issue,<variables…>`).
    pub nwp: Option<PathBuf>,
    pub step_minutes: u32,
    /// Bottom series, in order; `None` takes the first retained meters.
    pub meter_ids: Option<Vec<String>>,
    pub n_bottom: usize,
    pub cleaning: CleaningOptions,
    pub nwp_min_lead_hours: i64,
}

impl Default for DatasetFiles {
    fn default() -> Self {
        Self {
            meters: PathBuf::new(),
            nwp: None,
            step_minutes: 10,
            meter_ids: None,
            n_bottom: 24,
            cleaning: CleaningOptions::default(),
            nwp_min_lead_hours: 24,
        }
    }
}

impl Default for DataSource {
    fn default() -> Self {
        Self::Synthetic(SyntheticData::default())
    }
}

impl DataSource {
    pub fn n_bottom(&self) -> usize {
        match self {
            Self::Synthetic(s) => s.n_bottom,
            Self::Dataset(d) => d.meter_ids.as_ref().map_or(d.n_bottom, Vec::len),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyPlan {
    /// Group count of each intermediate level, coarsest first.
    pub group_counts: Vec<usize>,
}

impl Default for HierarchyPlan {
    fn default() -> Self {
        Self { group_counts: vec![2, 4] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub k: usize,
    pub test_rows: TestRows,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self { k: 10, test_rows: TestRows::DayBoundary }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconciliationSection {
    /// Forecaster whose base forecasts are reconciled, or `"best"` for the
    /// lowest mean RMSE on the top series.
    pub base_forecaster: String,
    pub methods: Vec<ReconciliationConfig>,
}

impl Default for ReconciliationSection {
    fn default() -> Self {
        let rc = |method, covariance| ReconciliationConfig { method, covariance, ..ReconciliationConfig::default() };
        Self {
            base_forecaster: "boosted_trees".into(),
            methods: vec![
                rc(ReconciliationMethod::Ols, CovarianceMethod::LedoitWolf),
                rc(ReconciliationMethod::MinT, CovarianceMethod::LedoitWolf),
                rc(ReconciliationMethod::MinT, CovarianceMethod::GraphicalLasso),
                rc(ReconciliationMethod::Bayes, CovarianceMethod::LedoitWolf),
                rc(ReconciliationMethod::Bayes, CovarianceMethod::GraphicalLasso),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// MAPE skips actuals below this magnitude (kW).
    pub mape_floor: f64,
    /// Width of the step-ahead bins of the RMSE-reduction tables.
    pub bin_hours: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { mape_floor: 0.1, bin_hours: 4.0 }
    }
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("hierload-out"),
            workers: None,
            cache: true,
            data: DataSource::default(),
            hierarchy: HierarchyPlan::default(),
            embedding: EmbeddingSpec::default(),
            folds: FoldConfig::default(),
            quantiles: QuantileGrid::default().alphas().to_vec(),
            forecasters: vec![
                ForecasterConfig::Persistence,
                ForecasterConfig::Armax(Default::default()),
                ForecasterConfig::HoltWinters(HwConfig::default()),
                ForecasterConfig::Knn(KnnConfig::default()),
                ForecasterConfig::BoostedTrees(TreesConfig::default()),
            ],
            reconciliation: ReconciliationSection::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; relative data paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataSource::Dataset(d) = &mut cfg.data {
            if d.meters.is_relative() {
                d.meters = base.join(&d.meters);
            }
            if let Some(n) = &mut d.nwp {
                if n.is_relative() {
                    *n = base.join(&*n);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        QuantileGrid::new(self.quantiles.clone()).map_err(|e| ConfigError(format!("quantiles: {e}")))?;
        self.embedding.validate().map_err(|e| ConfigError(format!("embedding: {e}")))?;
        if self.folds.k == 0 {
            return err("folds.k must be at least 1".into());
        }
        let n_bottom = self.data.n_bottom();
        if n_bottom == 0 {
            return err("the hierarchy needs at least one bottom series".into());
        }
        for &g in &self.hierarchy.group_counts {
            if g == 0 || !n_bottom.is_multiple_of(g) {
                return err(format!("{n_bottom} bottom series cannot be split into {g} groups"));
            }
        }
        match &self.data {
            DataSource::Synthetic(s) => {
                if s.days < 10 + self.folds.k {
                    return err(format!("synthetic data needs at least {} days for {} folds", 10 + self.folds.k, self.folds.k));
                }
            }
            DataSource::Dataset(d) => {
                if d.meters.as_os_str().is_empty() {
                    return err("data.meters is required for a dataset source".into());
                }
                if d.nwp.is_none() && !self.embedding.nwp_features.is_empty() {
                    return err("embedding.nwp_features needs data.nwp (or set nwp_features = [])".into());
                }
            }
        }
        if self.forecasters.is_empty() {
            return err("at least one forecaster is required".into());
        }
        let mut seen = BTreeSet::new();
        for f in &self.forecasters {
            if !seen.insert(f.name()) {
                return err(format!("forecaster `{}` listed twice", f.name()));
            }
            if let ForecasterConfig::BoostedTrees(t) = f {
                t.validate().map_err(|e| ConfigError(format!("boosted_trees: {e}")))?;
            }
        }
        if !self.reconciliation.methods.is_empty() {
            let b = &self.reconciliation.base_forecaster;
            if b != "best" && !seen.contains(b.as_str()) {
                return err(format!("reconciliation.base_forecaster `{b}` is not among the forecasters"));
            }
        }
        let mut labels = BTreeSet::new();
        for m in &self.reconciliation.methods {
            if !labels.insert(m.label()) {
                return err(format!("reconciliation method `{}` listed twice", m.label()));
            }
        }
        if !(self.evaluation.bin_hours > 0.0) || !(self.evaluation.mape_floor >= 0.0) {
            return err("evaluation.bin_hours must be positive and mape_floor non-negative".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded. Settings that do
    /// not change results (output location, worker count, caching) are left
    /// out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.workers = None;
        c.cache = true;
        digest_json(&c)
    }
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_json<S: Serialize>(value: &S) -> String {
    digest_bytes(&serde_json::to_vec(value).expect("configuration serializes"))
}
