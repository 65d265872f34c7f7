//! Pinball loss and the quantile score of quantile fans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecasters::ForecastResult;
use crate::scalar::Scalar;

/// Loss of quantile forecast `q` at level `alpha` for outcome `y`.
pub fn pinball_loss(q: f64, y: f64, alpha: f64) -> f64 {
    let e = q - y;
    if e >= 0.0 {
        e * (1.0 - alpha)
    } else {
        -e * alpha
    }
}

/// Trapezoid weights over `alphas` rescaled so that they sum to 1.
/// A single level gets weight 1. Works for either grid order.
pub fn trapezoid_weights(alphas: &[f64]) -> Vec<f64> {
    let k = alphas.len();
    if k <= 1 {
        return vec![1.0; k];
    }
    let mut w = vec![0.0; k];
    for i in 0..k - 1 {
        let half = (alphas[i + 1] - alphas[i]).abs() / 2.0;
        w[i] += half;
        w[i + 1] += half;
    }
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return vec![1.0 / k as f64; k];
    }
    w.iter().map(|v| v / total).collect()
}

/// Quantile score of one fan: weighted mean of the pinball losses.
pub fn quantile_score_of_fan(fan: &[f64], y: f64, alphas: &[f64]) -> f64 {
    trapezoid_weights(alphas).iter().zip(fan).zip(alphas).map(|((w, &q), &a)| w * pinball_loss(q, y, a)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileScoreReport {
    pub alphas: Vec<f64>,
    /// Mean pinball loss per level.
    pub mean_loss: Vec<f64>,
    /// Quadrature of `mean_loss` over the levels.
    pub qs: f64,
    /// Quantile score per step ahead.
    pub per_step: Vec<f64>,
}

impl QuantileScoreReport {
    /// Ratios to a reference report (typically persistence): overall and per step.
    pub fn normalized_by(&self, reference: &QuantileScoreReport) -> Result<(f64, Vec<f64>)> {
        if self.per_step.len() != reference.per_step.len() {
            return Err(Error::Dimension("reports differ in horizon".into()));
        }
        let ratio = |a: f64, b: f64| if b == 0.0 && a == 0.0 { 1.0 } else { a / b };
        let steps = self.per_step.iter().zip(&reference.per_step).map(|(&a, &b)| ratio(a, b)).collect();
        Ok((ratio(self.qs, reference.qs), steps))
    }
}

/// Scores fans given as `n × alphas` rows against `n` outcomes.
pub fn quantile_score(fans: &[f64], actuals: &[f64], alphas: &[f64]) -> Result<QuantileScoreReport> {
    let k = alphas.len();
    if k == 0 || fans.len() != actuals.len() * k {
        return Err(Error::Dimension(format!(
            "{} fan values for {} outcomes and {k} levels",
            fans.len(),
            actuals.len()
        )));
    }
    if actuals.is_empty() {
        return Err(Error::InvalidArgument("no outcomes to score".into()));
    }
    let mut mean_loss = vec![0.0; k];
    for (fan, &y) in fans.chunks(k).zip(actuals) {
        for (m, (&q, &a)) in mean_loss.iter_mut().zip(fan.iter().zip(alphas)) {
            *m += pinball_loss(q, y, a);
        }
    }
    let n = actuals.len() as f64;
    mean_loss.iter_mut().for_each(|m| *m /= n);
    let qs = trapezoid_weights(alphas).iter().zip(&mean_loss).map(|(w, l)| w * l).sum();
    Ok(QuantileScoreReport { alphas: alphas.to_vec(), mean_loss, qs, per_step: Vec::new() })
}

/// Scores every fan of a stacked result, with the per-step-ahead curve.
pub fn score_result<T: Scalar>(res: &ForecastResult<T>) -> Result<QuantileScoreReport> {
    let (rows, h) = (res.rows(), res.horizon());
    let mut fans = Vec::with_capacity(rows * h * res.alphas.len());
    let mut actuals = Vec::with_capacity(rows * h);
    let mut per_step = vec![0.0; h];
    for r in 0..rows {
        for (j, step) in per_step.iter_mut().enumerate() {
            let fan: Vec<f64> = res.fan(r, j).iter().map(|v| v.as_f64()).collect();
            let y = res.observed[(r, j)].as_f64();
            *step += quantile_score_of_fan(&fan, y, &res.alphas);
            fans.extend(fan);
            actuals.push(y);
        }
    }
    per_step.iter_mut().for_each(|s| *s /= rows.max(1) as f64);
    let mut report = quantile_score(&fans, &actuals, &res.alphas)?;
    report.per_step = per_step;
    Ok(report)
}

/// Fraction of outcomes at or below each quantile level.
pub fn coverage<T: Scalar>(res: &ForecastResult<T>) -> Vec<f64> {
    let k = res.alphas.len();
    let mut below = vec![0usize; k];
    for r in 0..res.rows() {
        for j in 0..res.horizon() {
            let y = res.observed[(r, j)];
            for (b, &q) in below.iter_mut().zip(res.fan(r, j)) {
                if y <= q {
                    *b += 1;
                }
            }
        }
    }
    let n = (res.rows() * res.horizon()).max(1) as f64;
    below.iter().map(|&b| b as f64 / n).collect()
}
