//! Machine-readable benchmark summary. Every report file is generated from
//! this structure alone.

use anyhow::Result;
use hierload::evaluation::{
    coverage, mape_map, qs_map, rmse_map, score_result, summary_row, KpiMatrix, Ranking, SummaryRow,
};
use hierload::hierarchy::Hierarchy;
use hierload::ForecastResult64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub step_of_day: usize,
    /// 1-based.
    pub step_ahead: usize,
    pub value: f64,
}

fn cells(map: &KpiMatrix) -> Vec<MapCell> {
    map.present().map(|(d, j, value)| MapCell { step_of_day: d, step_ahead: j + 1, value }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesKpis {
    pub series: String,
    /// 0 for the top series, increasing towards the bottom level.
    pub level: usize,
    pub bottom: bool,
    pub mean_rmse: Option<f64>,
    pub mean_mape: Option<f64>,
    /// Average over steps ahead of the persistence-normalized profiles.
    pub mean_nrmse: Option<f64>,
    pub mean_nmape: Option<f64>,
    pub mape_excluded: usize,
    pub qs: f64,
    pub nqs: Option<f64>,
    pub qs_per_step: Vec<f64>,
    pub nqs_per_step: Vec<Option<f64>>,
    /// Mean pinball loss per quantile level.
    pub mean_loss: Vec<f64>,
    /// Fraction of outcomes at or below each quantile.
    pub coverage: Vec<f64>,
    pub rmse_profile: Vec<Option<f64>>,
    pub mape_profile: Vec<Option<f64>>,
    pub nrmse_profile: Vec<Option<f64>>,
    pub nmape_profile: Vec<Option<f64>>,
}

/// KPI maps of one series, raw and normalized.
pub struct SeriesMaps {
    pub rmse: KpiMatrix,
    pub mape: KpiMatrix,
    pub qs: KpiMatrix,
    pub nrmse: KpiMatrix,
    pub nmape: KpiMatrix,
}

fn mean_of(v: &[Option<f64>]) -> Option<f64> {
    let xs: Vec<f64> = v.iter().flatten().copied().collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// `a / b`, with `0 / 0 = 1` and `None` for any other zero denominator.
fn ratio(a: f64, b: f64) -> Option<f64> {
    match (a, b) {
        (a, b) if b != 0.0 => Some(a / b),
        (a, _) if a == 0.0 => Some(1.0),
        _ => None,
    }
}

/// Scores one series against its persistence forecasts.
pub fn series_kpis(
    res: &ForecastResult64,
    persistence: &ForecastResult64,
    level: usize,
    bottom: bool,
    steps_per_day: usize,
    mape_floor: f64,
) -> Result<(SeriesKpis, SeriesMaps)> {
    let rmse = rmse_map(res, steps_per_day);
    let (mape, mape_excluded) = mape_map(res, steps_per_day, mape_floor);
    let p_rmse = rmse_map(persistence, steps_per_day);
    let (p_mape, _) = mape_map(persistence, steps_per_day, mape_floor);
    let nrmse = rmse.normalized_by(&p_rmse)?;
    let nmape = mape.normalized_by(&p_mape)?;
    let score = score_result(res)?;
    let p_score = score_result(persistence)?;
    let nqs_per_step = score.per_step.iter().zip(&p_score.per_step).map(|(&a, &b)| ratio(a, b)).collect();
    let nrmse_profile = nrmse.horizon_profile();
    let nmape_profile = nmape.horizon_profile();
    let kpis = SeriesKpis {
        series: res.series.clone(),
        level,
        bottom,
        mean_rmse: rmse.mean(),
        mean_mape: mape.mean(),
        mean_nrmse: mean_of(&nrmse_profile),
        mean_nmape: mean_of(&nmape_profile),
        mape_excluded,
        qs: score.qs,
        nqs: ratio(score.qs, p_score.qs),
        qs_per_step: score.per_step.clone(),
        nqs_per_step,
        mean_loss: score.mean_loss.clone(),
        coverage: coverage(res),
        rmse_profile: rmse.horizon_profile(),
        mape_profile: mape.horizon_profile(),
        nrmse_profile,
        nmape_profile,
    };
    let qs = qs_map(res, steps_per_day);
    Ok((kpis, SeriesMaps { rmse, mape, qs, nrmse, nmape }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleForecast {
    pub issue_index: usize,
    pub observed: Vec<f64>,
    pub point: Vec<f64>,
    /// `[level][step ahead]`.
    pub quantiles: Vec<Vec<f64>>,
}

impl ExampleForecast {
    pub fn from_result(res: &ForecastResult64, row: usize) -> Self {
        let h = res.horizon();
        Self {
            issue_index: res.issue_index[row],
            observed: res.observed.row(row).to_vec(),
            point: res.point.row(row).to_vec(),
            quantiles: (0..res.alphas.len()).map(|k| (0..h).map(|j| res.fan(row, j)[k]).collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecasterReport {
    pub name: String,
    pub series: Vec<SeriesKpis>,
    pub top_nrmse_map: Vec<MapCell>,
    pub top_nmape_map: Vec<MapCell>,
    pub top_example: Option<ExampleForecast>,
}

impl ForecasterReport {
    pub fn top(&self) -> &SeriesKpis {
        &self.series[0]
    }

    pub fn bottom(&self) -> impl Iterator<Item = &SeriesKpis> {
        self.series.iter().filter(|s| s.bottom)
    }
}

/// Scores every series of one forecaster; `results` and `persistence` are in
/// `S` row order.
pub fn forecaster_report(
    name: &str,
    results: &[ForecastResult64],
    persistence: &[ForecastResult64],
    h: &Hierarchy,
    steps_per_day: usize,
    mape_floor: f64,
) -> Result<(ForecasterReport, Vec<SeriesMaps>)> {
    let mut series = Vec::with_capacity(results.len());
    let mut maps = Vec::with_capacity(results.len());
    for (i, (r, p)) in results.iter().zip(persistence).enumerate() {
        let (k, m) = series_kpis(r, p, h.level_index()[i], i >= h.n_upper(), steps_per_day, mape_floor)?;
        series.push(k);
        maps.push(m);
    }
    let top = &results[0];
    let report = ForecasterReport {
        name: name.to_string(),
        series,
        top_nrmse_map: cells(&maps[0].nrmse),
        top_nmape_map: cells(&maps[0].nmape),
        top_example: (top.rows() > 0).then(|| ExampleForecast::from_result(top, top.rows() / 2)),
    };
    Ok((report, maps))
}

/// Table row from per-series maps (`maps[0]` is the top series).
pub fn table_row(name: &str, maps: &[SeriesMaps], h: &Hierarchy) -> SummaryRow {
    let bottom = &maps[h.n_upper()..];
    let bm: Vec<&KpiMatrix> = bottom.iter().map(|m| &m.mape).collect();
    let br: Vec<&KpiMatrix> = bottom.iter().map(|m| &m.rmse).collect();
    summary_row(name, &maps[0].mape, &maps[0].rmse, &bm, &br)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReduction {
    pub series: String,
    pub level: usize,
    pub bottom: bool,
    /// `1 − mean RMSE reconciled / mean RMSE base`.
    pub mean_reduction: Option<f64>,
    pub per_step: Vec<Option<f64>>,
    /// Per bin of `bin_steps` steps ahead.
    pub binned: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub label: String,
    pub summary: SummaryRow,
    pub series: Vec<SeriesReduction>,
    /// Quantile score of the reconciled fans per series.
    pub qs: Vec<f64>,
}

impl ReconciliationReport {
    pub fn top(&self) -> &SeriesReduction {
        &self.series[0]
    }

    /// Mean of the per-series mean reductions over the bottom level.
    pub fn bottom_mean_reduction(&self) -> Option<f64> {
        let v: Vec<Option<f64>> = self.series.iter().filter(|s| s.bottom).map(|s| s.mean_reduction).collect();
        mean_of(&v)
    }

    /// Per-step reduction averaged over every series of the hierarchy.
    pub fn hierarchy_per_step(&self) -> Vec<Option<f64>> {
        let h = self.series.first().map_or(0, |s| s.per_step.len());
        (0..h)
            .map(|j| mean_of(&self.series.iter().map(|s| s.per_step[j]).collect::<Vec<_>>()))
            .collect()
    }
}

/// Relative RMSE reductions of reconciled over base forecasts, per series,
/// per step ahead and per bin of `bin_steps` steps ahead.
pub fn compare_reconciliation(
    h: &Hierarchy,
    base: &[ForecastResult64],
    reconciled: &[ForecastResult64],
    steps_per_day: usize,
    bin_steps: usize,
) -> Result<Vec<SeriesReduction>> {
    anyhow::ensure!(base.len() == reconciled.len(), "base and reconciled series counts differ");
    let mut out = Vec::with_capacity(base.len());
    for (i, (b, r)) in base.iter().zip(reconciled).enumerate() {
        anyhow::ensure!(b.series == r.series && b.issue_index == r.issue_index, "series `{}` is misaligned", b.series);
        let bm = rmse_map(b, steps_per_day);
        let rm = rmse_map(r, steps_per_day);
        let per_step = bm
            .horizon_profile()
            .iter()
            .zip(rm.horizon_profile())
            .map(|(b, r)| match (b, r) {
                (Some(b), Some(r)) if *b > 0.0 => Some(1.0 - r / b),
                _ => None,
            })
            .collect();
        let mean_reduction = match (bm.mean(), rm.mean()) {
            (Some(b), Some(r)) if b > 0.0 => Some(1.0 - r / b),
            _ => None,
        };
        out.push(SeriesReduction {
            series: b.series.clone(),
            level: h.level_index()[i],
            bottom: i >= h.n_upper(),
            mean_reduction,
            per_step,
            binned: hierload::evaluation::binned_reduction(&bm, &rm, bin_steps)?,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub config_hash: String,
    pub version: String,
    pub steps_per_day: usize,
    pub step_minutes: u32,
    pub horizon: usize,
    pub alphas: Vec<f64>,
    pub series: Vec<String>,
    pub n_bottom: usize,
    pub test_rows: usize,
    pub forecasters: Vec<ForecasterReport>,
    /// Mean scores for the top series and the bottom average, one row per forecaster.
    pub table: Vec<SummaryRow>,
    pub ranking: Ranking,
    pub reconciliation_base: Option<String>,
    pub bin_steps: usize,
    pub reconciliation: Vec<ReconciliationReport>,
}

impl SummaryReport {
    pub fn forecaster(&self, name: &str) -> Option<&ForecasterReport> {
        self.forecasters.iter().find(|f| f.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
