//! KPI maps indexed by (step of day of the target, step ahead).

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::scores::quantile_score_of_fan;
use crate::error::{Error, Result};
use crate::forecasters::ForecastResult;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    Mape,
    Qs,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rmse => "rmse",
            Self::Mape => "mape",
            Self::Qs => "qs",
        }
    }
}

/// `steps_per_day × horizon` map; `None` marks cells without observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiMatrix {
    pub metric: Metric,
    pub normalized: bool,
    pub steps_per_day: usize,
    pub horizon: usize,
    /// Row-major over (d, j), `j` zero-based step ahead.
    pub values: Vec<Option<f64>>,
    /// Observations behind each cell, summed over folds.
    pub counts: Vec<usize>,
}

impl KpiMatrix {
    pub fn empty(metric: Metric, steps_per_day: usize, horizon: usize) -> Self {
        Self {
            metric,
            normalized: false,
            steps_per_day,
            horizon,
            values: vec![None; steps_per_day * horizon],
            counts: vec![0; steps_per_day * horizon],
        }
    }

    /// Value at target step of day `d` and zero-based step ahead `j`.
    pub fn get(&self, d: usize, j: usize) -> Option<f64> {
        self.values[d * self.horizon + j]
    }

    pub fn set(&mut self, d: usize, j: usize, v: Option<f64>) {
        self.values[d * self.horizon + j] = v;
    }

    pub fn present(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i / self.horizon, i % self.horizon, v)))
    }

    /// Mean over the populated cells.
    pub fn mean(&self) -> Option<f64> {
        let (s, n) = self.present().fold((0.0, 0usize), |(s, n), (_, _, v)| (s + v, n + 1));
        (n > 0).then(|| s / n as f64)
    }

    /// Per-step-ahead average over the populated steps of day.
    pub fn horizon_profile(&self) -> Vec<Option<f64>> {
        let mut sum = vec![0.0; self.horizon];
        let mut cnt = vec![0usize; self.horizon];
        for (_, j, v) in self.present() {
            sum[j] += v;
            cnt[j] += 1;
        }
        sum.iter().zip(&cnt).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect()
    }

    /// Elementwise ratio to `reference`. Cells where both are 0 give 1;
    /// cells with a zero reference otherwise are dropped.
    pub fn normalized_by(&self, reference: &KpiMatrix) -> Result<KpiMatrix> {
        if self.values.len() != reference.values.len() || self.metric != reference.metric {
            return Err(Error::Dimension("KPI maps differ in shape or metric".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| match (*a, *b) {
                (Some(a), Some(b)) if b != 0.0 => Some(a / b),
                (Some(a), Some(_)) if a == 0.0 => Some(1.0),
                _ => None,
            })
            .collect();
        Ok(KpiMatrix { values, normalized: true, ..self.clone() })
    }

    /// Cells where a normalized KPI is at least `threshold` (the baseline is
    /// not beaten).
    pub fn mask_at_least(&self, threshold: f64) -> Vec<Option<bool>> {
        self.values.iter().map(|v| v.map(|v| v >= threshold)).collect()
    }

    /// Long-format CSV `step_of_day,step_ahead,value,count` (1-based step
    /// ahead) with one line per populated cell; missing cells are omitted.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step_of_day", "step_ahead", "value", "count"])?;
        for (d, j, v) in self.present() {
            let n = self.counts[d * self.horizon + j];
            out.write_record([d.to_string(), (j + 1).to_string(), v.to_string(), n.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Per-fold accumulators of one map.
struct FoldCells {
    spd: usize,
    h: usize,
    /// `[fold][cell] = (sum, count)`.
    acc: Vec<Vec<(f64, usize)>>,
}

impl FoldCells {
    fn new(folds: usize, spd: usize, h: usize) -> Self {
        Self { spd, h, acc: vec![vec![(0.0, 0); spd * h]; folds] }
    }

    fn add(&mut self, fold: usize, d: usize, j: usize, v: f64) {
        let c = &mut self.acc[fold][d * self.h + j];
        c.0 += v;
        c.1 += 1;
    }

    /// Applies `finish` to each fold's cell mean and averages over the
    /// folds where the cell is populated.
    fn reduce(self, metric: Metric, finish: impl Fn(f64) -> f64) -> KpiMatrix {
        let mut map = KpiMatrix::empty(metric, self.spd, self.h);
        for i in 0..self.spd * self.h {
            let (mut s, mut n, mut total) = (0.0, 0usize, 0usize);
            for fold in &self.acc {
                let (sum, cnt) = fold[i];
                if cnt > 0 {
                    s += finish(sum / cnt as f64);
                    n += 1;
                    total += cnt;
                }
            }
            map.values[i] = (n > 0).then(|| s / n as f64);
            map.counts[i] = total;
        }
        map
    }
}

fn cells<T: Scalar>(res: &ForecastResult<T>, steps_per_day: usize) -> FoldCells {
    let folds = res.fold.iter().max().map_or(0, |f| f + 1);
    FoldCells::new(folds, steps_per_day, res.horizon())
}

fn target_sod<T: Scalar>(res: &ForecastResult<T>, r: usize, j: usize, spd: usize) -> usize {
    (res.issue_step_of_day[r] + j + 1) % spd
}

/// Root of the within-fold mean squared error per cell, averaged over folds.
pub fn rmse_map<T: Scalar>(res: &ForecastResult<T>, steps_per_day: usize) -> KpiMatrix {
    let mut c = cells(res, steps_per_day);
    for r in 0..res.rows() {
        for j in 0..res.horizon() {
            let e = (res.point[(r, j)] - res.observed[(r, j)]).as_f64();
            c.add(res.fold[r], target_sod(res, r, j, steps_per_day), j, e * e);
        }
    }
    c.reduce(Metric::Rmse, f64::sqrt)
}

/// MAPE in percent; observations with `|y| < floor` are skipped and
/// counted in the second return value.
pub fn mape_map<T: Scalar>(res: &ForecastResult<T>, steps_per_day: usize, floor: f64) -> (KpiMatrix, usize) {
    let mut c = cells(res, steps_per_day);
    let mut excluded = 0;
    for r in 0..res.rows() {
        for j in 0..res.horizon() {
            let y = res.observed[(r, j)].as_f64();
            if y.abs() < floor {
                excluded += 1;
                continue;
            }
            let e = res.point[(r, j)].as_f64() - y;
            c.add(res.fold[r], target_sod(res, r, j, steps_per_day), j, (e / y).abs());
        }
    }
    (c.reduce(Metric::Mape, |v| 100.0 * v), excluded)
}

/// Quantile score of the fans per cell (fold mean of within-cell means).
pub fn qs_map<T: Scalar>(res: &ForecastResult<T>, steps_per_day: usize) -> KpiMatrix {
    let mut c = cells(res, steps_per_day);
    for r in 0..res.rows() {
        for j in 0..res.horizon() {
            let fan: Vec<f64> = res.fan(r, j).iter().map(|v| v.as_f64()).collect();
            let qs = quantile_score_of_fan(&fan, res.observed[(r, j)].as_f64(), &res.alphas);
            c.add(res.fold[r], target_sod(res, r, j, steps_per_day), j, qs);
        }
    }
    c.reduce(Metric::Qs, |v| v)
}

/// `1 − reconciled / base` per cell.
pub fn relative_reduction(base: &KpiMatrix, reconciled: &KpiMatrix) -> Result<KpiMatrix> {
    let ratio = reconciled.normalized_by(base)?;
    Ok(KpiMatrix { values: ratio.values.iter().map(|v| v.map(|r| 1.0 - r)).collect(), normalized: false, ..ratio })
}

/// Relative reduction `1 − mean(reconciled)/mean(base)` over bins of
/// `bin_steps` consecutive steps ahead, using cells populated in both maps.
pub fn binned_reduction(base: &KpiMatrix, reconciled: &KpiMatrix, bin_steps: usize) -> Result<Vec<Option<f64>>> {
    if base.values.len() != reconciled.values.len() || bin_steps == 0 {
        return Err(Error::Dimension("maps differ in shape or empty bin".into()));
    }
    let bins = base.horizon.div_ceil(bin_steps);
    let mut sb = vec![0.0; bins];
    let mut sr = vec![0.0; bins];
    let mut n = vec![0usize; bins];
    for (i, (b, r)) in base.values.iter().zip(&reconciled.values).enumerate() {
        if let (Some(b), Some(r)) = (b, r) {
            let k = (i % base.horizon) / bin_steps;
            sb[k] += b;
            sr[k] += r;
            n[k] += 1;
        }
    }
    Ok((0..bins).map(|k| (n[k] > 0 && sb[k] > 0.0).then(|| 1.0 - sr[k] / sb[k])).collect())
}
