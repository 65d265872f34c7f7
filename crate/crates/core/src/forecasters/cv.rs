//! Runs a forecaster through the blocked cross-validation folds and stacks
//! its out-of-sample forecasts.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::armax::{ArmaxConfig, ArmaxEnsemble};
use super::detrend::{fit_detrend, DetrendModel};
use super::holt_winters::{fit_holt_winters, HwConfig};
use super::knn::{fit_knn, KnnConfig};
use super::persistence::persistence_forecast;
use super::quantiles::{repair_crossings, ErrorBank, ForecastResult};
use super::trees::{BoostedTreesSet, TreesConfig};
use crate::error::{Error, Result};
use crate::hierarchy::{hankel_embed, EmbeddingSpec, FoldPlan, FoldRows, SamplePair, TimeSeriesFrame};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Weather forecast columns the smoothing detrend regresses on.
pub const GHI_COLUMN: &str = "GHI";
pub const TEMPERATURE_COLUMN: &str = "T";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ForecasterConfig {
    Persistence,
    Armax(ArmaxConfig),
    HoltWinters(HwConfig),
    Knn(KnnConfig),
    BoostedTrees(TreesConfig),
}

impl ForecasterConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Persistence => "persistence",
            Self::Armax(_) => "armax",
            Self::HoltWinters(_) => "holt_winters",
            Self::Knn(_) => "knn",
            Self::BoostedTrees(_) => "boosted_trees",
        }
    }

    /// Whether the method consumes the embedded regressor matrix.
    pub fn uses_features(&self) -> bool {
        matches!(self, Self::Knn(_) | Self::BoostedTrees(_))
    }
}

/// Everything shared by all series of one cross-validation run.
#[derive(Clone, Copy, Debug)]
pub struct CvInput<'a, T> {
    pub frame: &'a TimeSeriesFrame<T>,
    pub plan: &'a FoldPlan,
    pub spec: &'a EmbeddingSpec,
    pub alphas: &'a [f64],
    pub seed: u64,
}

/// In-sample residuals `ŷ − y` of one fold at the training issue times
/// whose step of day also occurs among the fold's test issue times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResiduals<T> {
    pub fold: usize,
    pub issue_index: Vec<usize>,
    pub step_of_day: Vec<usize>,
    /// `rows × horizon`.
    pub residuals: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesForecast<T> {
    pub result: ForecastResult<T>,
    pub train_residuals: Vec<TrainResiduals<T>>,
}

/// Deterministic stream separation for per-(series, fold) generators.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct FoldOutput<T> {
    issue_index: Vec<usize>,
    point: Vec<Vec<T>>,
    observed: Vec<Vec<T>>,
    quantiles: Vec<T>,
    residuals: TrainResiduals<T>,
}

/// Rows and data one fold of one series works on.
struct FoldCtx<'a, T> {
    input: &'a CvInput<'a, T>,
    fold: usize,
    y: &'a [T],
    pair: &'a SamplePair<T>,
    rows: FoldRows,
    /// Training rows issued at a step of day that also has test rows.
    d_rows: Vec<usize>,
    seed: u64,
}

impl<T: Scalar> FoldCtx<'_, T> {
    fn spd(&self) -> usize {
        self.input.plan.steps_per_day
    }

    fn horizon(&self) -> usize {
        self.input.spec.horizon
    }

    fn issue(&self, r: usize) -> usize {
        self.pair.issue_index[r]
    }

    fn sod(&self, t: usize) -> usize {
        self.input.frame.step_of_day(t)
    }

    /// Residuals of `forecast` at the D-rows where it succeeds.
    fn residuals(&self, mut forecast: impl FnMut(usize) -> Result<Option<Vec<T>>>) -> Result<TrainResiduals<T>> {
        let mut issue_index = Vec::new();
        let mut data = Vec::new();
        for &r in &self.d_rows {
            if let Some(p) = forecast(r)? {
                issue_index.push(self.issue(r));
                data.extend(p.iter().zip(self.pair.y.row(r)).map(|(&a, &b)| a - b));
            }
        }
        let step_of_day = issue_index.iter().map(|&t| self.sod(t)).collect();
        Ok(TrainResiduals {
            fold: self.fold,
            residuals: Matrix::from_vec(issue_index.len(), self.horizon(), data)?,
            issue_index,
            step_of_day,
        })
    }

    /// Point forecasts at the test rows plus fans from the residual bank.
    fn finish_with_bank(
        &self,
        residuals: TrainResiduals<T>,
        mut forecast: impl FnMut(usize) -> Result<Vec<T>>,
    ) -> Result<FoldOutput<T>> {
        let bank = ErrorBank::from_residuals(&residuals.residuals, &residuals.step_of_day, self.spd());
        let mut out = FoldOutput {
            issue_index: Vec::new(),
            point: Vec::new(),
            observed: Vec::new(),
            quantiles: Vec::new(),
            residuals,
        };
        for &r in &self.rows.test {
            let t = self.issue(r);
            let p = forecast(r)?;
            out.quantiles.extend(bank.fan(&p, self.sod(t), self.input.alphas)?);
            out.issue_index.push(t);
            out.point.push(p);
            out.observed.push(self.pair.y.row(r).to_vec());
        }
        Ok(out)
    }
}

/// Runs `cfg` on every series of `input.frame` listed in `series`.
pub fn run_forecaster_cv<T: Scalar>(
    cfg: &ForecasterConfig,
    input: &CvInput<'_, T>,
    series: &[String],
) -> Result<Vec<SeriesForecast<T>>> {
    if input.plan.horizon != input.spec.horizon || input.plan.embed != input.spec.embed {
        return Err(Error::InvalidArgument("fold plan and embedding disagree on horizon or window".into()));
    }
    if input.plan.steps_per_day != input.frame.steps_per_day() {
        return Err(Error::InvalidArgument("fold plan and frame disagree on steps per day".into()));
    }
    let exog = match cfg {
        ForecasterConfig::Armax(a) => Some(armax_exog(input.frame, input.spec, a)?),
        _ => None,
    };
    series
        .par_iter()
        .enumerate()
        .map(|(si, name)| run_series(cfg, input, si, name, exog.as_ref()))
        .collect()
}

fn run_series<T: Scalar>(
    cfg: &ForecasterConfig,
    input: &CvInput<'_, T>,
    si: usize,
    name: &str,
    exog: Option<&Matrix<T>>,
) -> Result<SeriesForecast<T>> {
    let spec = if cfg.uses_features() {
        input.spec.clone()
    } else {
        EmbeddingSpec {
            target_lags: false,
            regressors: Vec::new(),
            calendar_features: Vec::new(),
            nwp_features: Vec::new(),
            ..input.spec.clone()
        }
    };
    let pair = hankel_embed(input.frame, name, &spec)?;
    let y = input.frame.column(name)?;
    let outputs: Vec<FoldOutput<T>> = (0..input.plan.k)
        .into_par_iter()
        .map(|fold| {
            let rows = input.plan.rows(fold, &pair.issue_index);
            if rows.test.is_empty() || rows.train.is_empty() {
                return Err(Error::TooShort { needed: 1, available: 0 });
            }
            let test_sods: BTreeSet<usize> =
                rows.test.iter().map(|&r| input.frame.step_of_day(pair.issue_index[r])).collect();
            let d_rows = rows
                .train
                .iter()
                .copied()
                .filter(|&r| test_sods.contains(&input.frame.step_of_day(pair.issue_index[r])))
                .collect();
            let ctx = FoldCtx {
                input,
                fold,
                y,
                pair: &pair,
                rows,
                d_rows,
                seed: derive_seed(input.seed, si as u64, fold as u64),
            };
            match cfg {
                ForecasterConfig::Persistence => run_persistence(&ctx),
                ForecasterConfig::Armax(a) => run_armax(&ctx, a, exog.expect("exogenous inputs built")),
                ForecasterConfig::HoltWinters(h) => run_holt_winters(&ctx, h),
                ForecasterConfig::Knn(k) => run_knn(&ctx, k),
                ForecasterConfig::BoostedTrees(b) => run_trees(&ctx, b),
            }
        })
        .collect::<Result<_>>()?;

    let h = input.spec.horizon;
    let mut result = ForecastResult {
        series: name.to_string(),
        alphas: input.alphas.to_vec(),
        issue_index: Vec::new(),
        issue_step_of_day: Vec::new(),
        fold: Vec::new(),
        point: Matrix::zeros(0, h),
        observed: Matrix::zeros(0, h),
        quantiles: Vec::new(),
    };
    let mut point = Vec::new();
    let mut observed = Vec::new();
    let mut train_residuals = Vec::with_capacity(outputs.len());
    for (fold, o) in outputs.into_iter().enumerate() {
        result.fold.extend(std::iter::repeat_n(fold, o.issue_index.len()));
        result.issue_step_of_day.extend(o.issue_index.iter().map(|&t| input.frame.step_of_day(t)));
        result.issue_index.extend(o.issue_index);
        point.extend(o.point.into_iter().flatten());
        observed.extend(o.observed.into_iter().flatten());
        result.quantiles.extend(o.quantiles);
        train_residuals.push(o.residuals);
    }
    let n = result.issue_index.len();
    result.point = Matrix::from_vec(n, h, point)?;
    result.observed = Matrix::from_vec(n, h, observed)?;
    Ok(SeriesForecast { result, train_residuals })
}

fn run_persistence<T: Scalar>(ctx: &FoldCtx<'_, T>) -> Result<FoldOutput<T>> {
    let (h, spd) = (ctx.horizon(), ctx.spd());
    let residuals = ctx.residuals(|r| Ok(persistence_forecast(ctx.y, ctx.issue(r), h, spd).ok()))?;
    ctx.finish_with_bank(residuals, |r| persistence_forecast(ctx.y, ctx.issue(r), h, spd))
}

/// Exogenous inputs of the ARMAX models for every step of the frame:
/// weather forecasts valid at that step, daily Fourier terms, the
/// non-working-day flag (optionally interacted with the Fourier terms) and
/// an intercept.
pub fn armax_exog<T: Scalar>(frame: &TimeSeriesFrame<T>, spec: &EmbeddingSpec, cfg: &ArmaxConfig) -> Result<Matrix<T>> {
    let nwp: Vec<&[T]> = spec.nwp_features.iter().map(|c| frame.column(c)).collect::<Result<_>>()?;
    let spd = frame.steps_per_day() as f64;
    let k = cfg.fourier_harmonics;
    let width = nwp.len() + 2 * k + 1 + if cfg.non_working_harmonics { 2 * k } else { 0 } + 1;
    let mut data = Vec::with_capacity(frame.len() * width);
    for t in 0..frame.len() {
        data.extend(nwp.iter().map(|c| c[t]));
        let phase = 2.0 * std::f64::consts::PI * frame.step_of_day(t) as f64 / spd;
        let fourier: Vec<f64> =
            (1..=k).flat_map(|m| [(m as f64 * phase).sin(), (m as f64 * phase).cos()]).collect();
        let nw = if frame.is_non_working_day(t) { 1.0 } else { 0.0 };
        data.extend(fourier.iter().map(|&v| T::lit(v)));
        data.push(T::lit(nw));
        if cfg.non_working_harmonics {
            data.extend(fourier.iter().map(|&v| T::lit(v * nw)));
        }
        data.push(T::one());
    }
    Matrix::from_vec(frame.len(), width, data)
}

fn run_armax<T: Scalar>(ctx: &FoldCtx<'_, T>, cfg: &ArmaxConfig, exog: &Matrix<T>) -> Result<FoldOutput<T>> {
    let spd = ctx.spd();
    let segments: Vec<(usize, usize)> = ctx.input.plan.folds[ctx.fold]
        .sequences
        .iter()
        .map(|s| {
            let r = s.train_steps(spd);
            (r.start, r.end)
        })
        .collect();
    let ens = ArmaxEnsemble::fit(ctx.y, exog, &segments, cfg)?;
    if ens.dropped > 0 {
        log::info!("fold {}: {} of {} ARMAX segment fits dropped", ctx.fold, ens.dropped, segments.len());
    }
    let filter = cfg.filter_len.unwrap_or(spd);
    let h = ctx.horizon();
    let residuals = ctx.residuals(|r| Ok(ens.armax_ensemble_forecast(ctx.y, exog, ctx.issue(r), h, filter).ok()))?;
    ctx.finish_with_bank(residuals, |r| ens.armax_ensemble_forecast(ctx.y, exog, ctx.issue(r), h, filter))
}

fn run_holt_winters<T: Scalar>(ctx: &FoldCtx<'_, T>, cfg: &HwConfig) -> Result<FoldOutput<T>> {
    let frame = ctx.input.frame;
    let spd = ctx.spd();
    let p1 = cfg.daily_period.unwrap_or(spd);
    let p2 = cfg.weekly_period.unwrap_or(7 * spd);
    let h = ctx.horizon();
    let blocks_steps: Vec<std::ops::Range<usize>> =
        ctx.input.plan.folds[ctx.fold].sequences.iter().map(|s| s.train_steps(spd)).collect();

    let drivers = if cfg.detrend && frame.has_column(GHI_COLUMN) && frame.has_column(TEMPERATURE_COLUMN) {
        Some((frame.column(GHI_COLUMN)?, frame.column(TEMPERATURE_COLUMN)?))
    } else {
        None
    };
    let trend: Option<DetrendModel<T>> = match drivers {
        Some((ghi, temp)) => {
            let pick = |c: &[T]| blocks_steps.iter().flat_map(|b| c[b.clone()].iter().copied()).collect::<Vec<T>>();
            Some(fit_detrend(&pick(ctx.y), &pick(ghi), &pick(temp))?)
        }
        None => None,
    };
    let trend_at = |t: usize| match (&trend, drivers) {
        (Some(m), Some((ghi, temp))) => m.trend(ghi[t], temp[t]),
        _ => T::zero(),
    };
    let resid: Vec<T> = (0..ctx.y.len()).map(|t| ctx.y[t] - trend_at(t)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let params = fit_holt_winters(&resid, &blocks_steps, h, p1, p2, cfg, &mut rng)?;

    // One pass of each smoothing set serves the training and the test issue times.
    let mut issues: Vec<usize> = ctx.d_rows.iter().chain(&ctx.rows.test).map(|&r| ctx.issue(r)).collect();
    issues.sort_unstable();
    issues.dedup();
    let f = params.forecast_at(&resid, &issues)?;
    let at = |t: usize| -> Option<Vec<T>> {
        let k = issues.binary_search(&t).ok()?;
        Some(f.row(k).iter().enumerate().map(|(j, &v)| v + trend_at(t + j + 1)).collect())
    };
    // Training issue times inside the initial weekly cycle forecast values
    // the state was initialised on.
    let residuals = ctx.residuals(|r| Ok(at(ctx.issue(r)).filter(|_| ctx.issue(r) >= p2)))?;
    ctx.finish_with_bank(residuals, |r| at(ctx.issue(r)).ok_or(Error::Data("missing forecast".into())))
}

fn run_knn<T: Scalar>(ctx: &FoldCtx<'_, T>, cfg: &KnnConfig) -> Result<FoldOutput<T>> {
    let x = ctx.pair.x.select_rows(&ctx.rows.train);
    let y = ctx.pair.y.select_rows(&ctx.rows.train);
    let model = fit_knn(&x, &y, cfg.k)?;
    let train_issue: Vec<usize> = ctx.rows.train.iter().map(|&r| ctx.issue(r)).collect();
    let purge = ctx.input.spec.embed + ctx.horizon();
    let residuals = ctx.residuals(|r| {
        let tq = ctx.issue(r);
        let nb = model.neighbours(ctx.pair.x.row(r), |i| train_issue[i].abs_diff(tq) < purge)?;
        Ok(Some((0..ctx.horizon()).map(|j| model.predict_step(&nb, j)).collect()))
    })?;
    let mut out = FoldOutput {
        issue_index: Vec::new(),
        point: Vec::new(),
        observed: Vec::new(),
        quantiles: Vec::new(),
        residuals,
    };
    for &r in &ctx.rows.test {
        let (p, mut fan) = model.knn_forecast(ctx.pair.x.row(r), ctx.input.alphas)?;
        repair_crossings(&mut fan, ctx.input.alphas.len());
        out.issue_index.push(ctx.issue(r));
        out.point.push(p);
        out.observed.push(ctx.pair.y.row(r).to_vec());
        out.quantiles.extend(fan);
    }
    Ok(out)
}

fn run_trees<T: Scalar>(ctx: &FoldCtx<'_, T>, cfg: &TreesConfig) -> Result<FoldOutput<T>> {
    let fit = |rows: &[usize], seed: u64| {
        BoostedTreesSet::fit(&ctx.pair.x.select_rows(rows), &ctx.pair.y.select_rows(rows), cfg, seed)
    };
    let model = fit(&ctx.rows.train, ctx.seed)?;
    let mut held_out: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    let groups = cfg.residual_folds;
    if groups >= 2 {
        let seq_of: BTreeMap<usize, usize> =
            ctx.rows.train.iter().copied().zip(ctx.rows.train_sequence.iter().copied()).collect();
        for g in 0..groups {
            let keep: Vec<usize> = ctx.rows.train.iter().copied().filter(|r| seq_of[r] % groups != g).collect();
            let held: Vec<usize> = ctx.d_rows.iter().copied().filter(|r| seq_of[r] % groups == g).collect();
            if keep.is_empty() || held.is_empty() {
                continue;
            }
            let m = fit(&keep, derive_seed(ctx.seed, 1 + g as u64, 0))?;
            held_out.extend(held.into_iter().map(|r| (r, m.predict(ctx.pair.x.row(r)))));
        }
    }
    let residuals = ctx.residuals(|r| {
        Ok(Some(if groups >= 2 { held_out.remove(&r) } else { None }.unwrap_or_else(|| model.predict(ctx.pair.x.row(r)))))
    })?;
    ctx.finish_with_bank(residuals, |r| Ok(model.predict(ctx.pair.x.row(r))))
}
