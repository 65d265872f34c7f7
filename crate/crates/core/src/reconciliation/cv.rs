//! Reconciles stacked cross-validated base forecasts fold by fold and
//! rebuilds quantile fans from reconciled training errors.

use serde::{Deserialize, Serialize};

use super::covariance::{estimate_graphical_lasso, estimate_ledoit_wolf, CovarianceMethod, GlassoOptions};
use super::methods::{bayes_projection, mint_projection, ols_projection, Projection, ReconciliationMethod};
use crate::error::{Error, Result};
use crate::forecasters::{ErrorBank, ForecastResult, SeriesForecast};
use crate::hierarchy::Hierarchy;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Which training residuals the covariance is estimated from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceScope {
    /// Each fold uses only its own training residuals.
    #[default]
    PerFold,
    /// One estimate from the training residuals of every fold.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconciliationConfig {
    pub method: ReconciliationMethod,
    pub covariance: CovarianceMethod,
    /// Graphical-lasso penalty; `None` uses the data-driven default.
    pub lambda: Option<f64>,
    pub glasso: GlassoOptions,
    pub scope: CovarianceScope,
    /// Estimate one covariance per step ahead instead of using the
    /// one-step-ahead residuals for every horizon.
    pub per_horizon: bool,
    /// Keep the upper/bottom error cross-covariance in the Bayesian update.
    pub cross_covariance: bool,
}

impl Default for ReconciliationConfig {
    fn default() -> Self {
        Self {
            method: ReconciliationMethod::MinT,
            covariance: CovarianceMethod::LedoitWolf,
            lambda: None,
            glasso: GlassoOptions::default(),
            scope: CovarianceScope::PerFold,
            per_horizon: false,
            cross_covariance: false,
        }
    }
}

impl ReconciliationConfig {
    /// Short label such as `mint-ledoit_wolf`.
    pub fn label(&self) -> String {
        if self.method.needs_covariance() {
            let cov = match self.covariance {
                CovarianceMethod::LedoitWolf => "lw",
                CovarianceMethod::GraphicalLasso => "glasso",
            };
            format!("{}-{cov}", self.method.name())
        } else {
            self.method.name().to_string()
        }
    }
}

/// Residual matrix (`rows × n`) of step ahead `j` at the training issue
/// times shared by every series.
fn residual_samples<T: Scalar>(base: &[SeriesForecast<T>], folds: &[usize], j: usize) -> Matrix<T> {
    let mut data = Vec::new();
    let mut rows = 0;
    for &f in folds {
        let first = &base[0].train_residuals[f];
        for (r, &t) in first.issue_index.iter().enumerate() {
            let mut row = Vec::with_capacity(base.len());
            row.push(first.residuals[(r, j)]);
            for s in &base[1..] {
                let tr = &s.train_residuals[f];
                match tr.issue_index.binary_search(&t) {
                    Ok(k) => row.push(tr.residuals[(k, j)]),
                    Err(_) => break,
                }
            }
            if row.len() == base.len() {
                data.extend(row);
                rows += 1;
            }
        }
    }
    Matrix::from_vec(rows, base.len(), data).expect("rows of equal width")
}

fn projection<T: Scalar>(
    cfg: &ReconciliationConfig,
    h: &Hierarchy,
    base: &[SeriesForecast<T>],
    folds: &[usize],
    j: usize,
) -> Result<Projection<T>> {
    if !cfg.method.needs_covariance() {
        return ols_projection(h);
    }
    let e = residual_samples(base, folds, j);
    let est = match cfg.covariance {
        CovarianceMethod::LedoitWolf => estimate_ledoit_wolf(&e)?,
        CovarianceMethod::GraphicalLasso => estimate_graphical_lasso(&e, cfg.lambda, &cfg.glasso)?,
    };
    match cfg.method {
        ReconciliationMethod::MinT => mint_projection(h, &est.w),
        ReconciliationMethod::Bayes => bayes_projection(h, &est.w, cfg.cross_covariance),
        ReconciliationMethod::Ols => unreachable!("handled above"),
    }
}

/// Output of [`reconcile_cv`]: one stacked result per series plus the maps used.
#[derive(Clone, Debug)]
pub struct ReconciledCv<T> {
    pub results: Vec<ForecastResult<T>>,
    /// `projections[fold][j]`; a single entry per fold unless per-horizon.
    pub projections: Vec<Vec<Projection<T>>>,
}

/// Reconciles base forecasts of every series (in `S` row order) fold by
/// fold. Fans are rebuilt from reconciled training errors, which for
/// coherent observations equal `S P e`.
pub fn reconcile_cv<T: Scalar>(
    base: &[SeriesForecast<T>],
    h: &Hierarchy,
    cfg: &ReconciliationConfig,
    steps_per_day: usize,
) -> Result<ReconciledCv<T>> {
    let n = h.n_series();
    if base.len() != n {
        return Err(Error::Dimension(format!("{} base series for a hierarchy of {n}", base.len())));
    }
    let first = &base[0].result;
    for s in &base[1..] {
        if s.result.issue_index != first.issue_index || s.result.fold != first.fold {
            return Err(Error::Dimension(format!("series `{}` has different test rows", s.result.series)));
        }
        if s.train_residuals.len() != base[0].train_residuals.len() {
            return Err(Error::Dimension("series disagree on the number of folds".into()));
        }
    }
    let horizon = first.horizon();
    let alphas = first.alphas.clone();
    let n_folds = base[0].train_residuals.len();
    let all_folds: Vec<usize> = (0..n_folds).collect();
    let n_maps = if cfg.per_horizon { horizon } else { 1 };

    let pooled: Option<Vec<Projection<T>>> = match cfg.scope {
        CovarianceScope::Pooled => {
            Some((0..n_maps).map(|j| projection(cfg, h, base, &all_folds, j)).collect::<Result<_>>()?)
        }
        CovarianceScope::PerFold => None,
    };

    let rows = first.rows();
    let mut point: Vec<Matrix<T>> = (0..n).map(|_| Matrix::zeros(rows, horizon)).collect();
    let mut quantiles: Vec<Vec<T>> = (0..n).map(|_| Vec::with_capacity(rows * horizon * alphas.len())).collect();
    let mut projections = Vec::with_capacity(n_folds);
    let s_mat: Matrix<T> = h.summation_matrix();

    for f in 0..n_folds {
        let maps = match &pooled {
            Some(p) => p.clone(),
            None => (0..n_maps).map(|j| projection(cfg, h, base, &[f], j)).collect::<Result<Vec<_>>>()?,
        };
        let map_of = |j: usize| &maps[if cfg.per_horizon { j } else { 0 }];

        // Reconciled training errors S P e, banked per series.
        let mut banks: Vec<ErrorBank<T>> = (0..n).map(|_| ErrorBank::new(horizon, steps_per_day)).collect();
        for j in 0..horizon {
            let sp = s_mat.matmul(&map_of(j).p);
            let e = residual_samples(base, &[f], j);
            let sods = shared_step_of_day(base, f);
            for (r, row) in e.rows_iter().enumerate() {
                let rec = sp.mul_vec(row);
                let d = (sods[r] + j + 1) % steps_per_day;
                for (bank, v) in banks.iter_mut().zip(rec) {
                    bank.push(j, d, v);
                }
            }
        }
        banks.iter_mut().for_each(ErrorBank::finish);

        for r in (0..rows).filter(|&r| first.fold[r] == f) {
            let mut fan_point = vec![Vec::with_capacity(horizon); n];
            for j in 0..horizon {
                let yhat: Vec<T> = base.iter().map(|s| s.result.point[(r, j)]).collect();
                let rec = map_of(j).apply_vec(&yhat, h);
                for (i, v) in rec.into_iter().enumerate() {
                    point[i][(r, j)] = v;
                    fan_point[i].push(v);
                }
            }
            for i in 0..n {
                quantiles[i].extend(banks[i].fan(&fan_point[i], first.issue_step_of_day[r], &alphas)?);
            }
        }
        projections.push(maps);
    }

    let results = base
        .iter()
        .zip(point)
        .zip(quantiles)
        .map(|((s, p), q)| ForecastResult { point: p, quantiles: q, ..s.result.clone() })
        .collect();
    Ok(ReconciledCv { results, projections })
}

/// Issue step of day of the residual rows kept by [`residual_samples`].
fn shared_step_of_day<T: Scalar>(base: &[SeriesForecast<T>], f: usize) -> Vec<usize> {
    let first = &base[0].train_residuals[f];
    first
        .issue_index
        .iter()
        .zip(&first.step_of_day)
        .filter(|(t, _)| base[1..].iter().all(|s| s.train_residuals[f].issue_index.binary_search(t).is_ok()))
        .map(|(_, &d)| d)
        .collect()
}
