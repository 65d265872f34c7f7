//! ARMAX models estimated by two-stage least squares and averaged over
//! training segments.
//!
//! Model: `y[t] = Σ φᵢ y[t−i] + βᵀx[t] + ε[t] − Σ θᵢ ε[t−i]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmaxConfig {
    pub ar_order: usize,
    pub ma_order: usize,
    /// Order of the long autoregression producing residual proxies.
    pub long_ar_order: usize,
    /// Daily Fourier pairs added to the exogenous inputs.
    pub fourier_harmonics: usize,
    /// Also add the harmonics multiplied by the non-working-day flag.
    pub non_working_harmonics: bool,
    /// Steps of measured history used to rebuild the residual state before
    /// forecasting; `None` uses one day.
    pub filter_len: Option<usize>,
}

impl Default for ArmaxConfig {
    fn default() -> Self {
        Self {
            ar_order: 6,
            ma_order: 5,
            long_ar_order: 24,
            fourier_harmonics: 3,
            non_working_harmonics: true,
            filter_len: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaxModel<T> {
    pub phi: Vec<T>,
    pub theta: Vec<T>,
    pub beta: Vec<T>,
}

/// True when all roots of `1 − Σ aᵢ zⁱ` lie outside the unit circle,
/// checked through the reflection coefficients of the step-down recursion.
pub fn is_stable<T: Scalar>(coeffs: &[T]) -> bool {
    let mut a: Vec<f64> = coeffs.iter().map(|c| c.as_f64()).collect();
    while let Some(&k) = a.last() {
        if !k.is_finite() || k.abs() >= 1.0 {
            return false;
        }
        let m = a.len() - 1;
        let denom = 1.0 - k * k;
        a = (0..m).map(|i| (a[i] + k * a[m - 1 - i]) / denom).collect();
    }
    true
}

/// Fits one ARMAX model on a contiguous segment. `x` holds one row of
/// exogenous inputs per value of `y`.
pub fn fit_armax_segment<T: Scalar>(
    y: &[T],
    x: &Matrix<T>,
    ar_order: usize,
    ma_order: usize,
    long_ar_order: usize,
) -> Result<ArmaxModel<T>> {
    let n = y.len();
    let nx = x.ncols();
    if x.nrows() != n {
        return Err(Error::Dimension(format!("{} exogenous rows for {n} values", x.nrows())));
    }
    let (p, q) = (ar_order, ma_order);
    let min_len = (3 * (p + q)).max(p + q + nx + 2);
    if n < min_len {
        return Err(Error::TooShort { needed: min_len, available: n });
    }
    let tol = T::epsilon().sqrt() * T::lit(0.01);

    // Stage 1: long autoregression with exogenous inputs gives residual proxies.
    let mut eps = vec![T::zero(); n];
    let mut first = p;
    if q > 0 {
        let m = long_ar_order.max(p + q).min((n - nx) / 3);
        let rows = n - m;
        let design = Matrix::from_fn(rows, m + nx, |r, c| {
            let t = r + m;
            if c < m {
                y[t - 1 - c]
            } else {
                x[(t, c - m)]
            }
        });
        let ls = least_squares(&design, &y[m..], tol)?;
        for r in 0..rows {
            let fit: T = design.row(r).iter().zip(&ls.coefficients).map(|(&a, &b)| a * b).sum();
            eps[r + m] = y[r + m] - fit;
        }
        first = (m + q).max(p);
    }

    // Stage 2: joint regression on lagged values, lagged proxies and inputs.
    let rows = n - first;
    let design = Matrix::from_fn(rows, p + q + nx, |r, c| {
        let t = r + first;
        if c < p {
            y[t - 1 - c]
        } else if c < p + q {
            eps[t - 1 - (c - p)]
        } else {
            x[(t, c - p - q)]
        }
    });
    let ls = least_squares(&design, &y[first..], tol)?;
    let c = ls.coefficients;
    Ok(ArmaxModel {
        phi: c[..p].to_vec(),
        theta: c[p..p + q].iter().map(|&v| -v).collect(),
        beta: c[p + q..].to_vec(),
    })
}

impl<T: Scalar> ArmaxModel<T> {
    fn ar_part(&self, y: &[T], t: usize) -> T {
        self.phi.iter().enumerate().map(|(i, &f)| f * y[t - 1 - i]).sum()
    }

    fn exog_part(&self, x: &[T]) -> T {
        self.beta.iter().zip(x).map(|(&b, &v)| b * v).sum()
    }

    pub fn is_stable(&self) -> bool {
        is_stable(&self.phi) && is_stable(&self.theta)
    }

    /// `h`-step recursive forecast issued after time `t`. Residuals are
    /// rebuilt over `y[t−filter_len+1 ..= t]` starting from zero; future
    /// residuals are zero. `x` must have rows up to `t + h`.
    pub fn forecast(&self, y: &[T], x: &Matrix<T>, t: usize, h: usize, filter_len: usize) -> Result<Vec<T>> {
        let (p, q) = (self.phi.len(), self.theta.len());
        let from = (t + 1).checked_sub(filter_len).filter(|&f| f >= p).ok_or(Error::TooShort {
            needed: filter_len + p,
            available: t + 1,
        })?;
        if x.nrows() <= t + h || t >= y.len() {
            return Err(Error::Dimension("exogenous inputs do not reach the forecast horizon".into()));
        }
        // eps[k] is the residual at time from + k.
        let mut eps: Vec<T> = Vec::with_capacity(filter_len + h);
        let eps_at = |eps: &Vec<T>, s: usize| if s >= from { eps[s - from] } else { T::zero() };
        for s in from..=t {
            let ma: T = (0..q)
                .map(|i| s.checked_sub(1 + i).map_or(T::zero(), |k| self.theta[i] * eps_at(&eps, k)))
                .sum();
            let pred = self.ar_part(y, s) + self.exog_part(x.row(s)) - ma;
            eps.push(y[s] - pred);
        }
        let mut path: Vec<T> = y[t + 1 - p.max(1).min(t + 1)..=t].to_vec();
        let offset = t + 1 - path.len();
        let mut out = Vec::with_capacity(h);
        for j in 1..=h {
            let s = t + j;
            let ar: T = (0..p).map(|i| self.phi[i] * path[s - 1 - i - offset]).sum();
            let ma: T = (0..q)
                .map(|i| match s.checked_sub(1 + i) {
                    Some(k) if k <= t => self.theta[i] * eps_at(&eps, k),
                    _ => T::zero(),
                })
                .sum();
            let v = ar + self.exog_part(x.row(s)) - ma;
            path.push(v);
            out.push(v);
        }
        Ok(out)
    }
}

/// Models fitted on separate segments; the forecast is their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaxEnsemble<T> {
    pub models: Vec<ArmaxModel<T>>,
    /// Segments whose fit was unstable or failed.
    pub dropped: usize,
}

impl<T: Scalar> ArmaxEnsemble<T> {
    /// Fits one model per `(start, end)` segment of `y`, dropping unstable fits.
    pub fn fit(y: &[T], x: &Matrix<T>, segments: &[(usize, usize)], cfg: &ArmaxConfig) -> Result<Self> {
        let mut models = Vec::new();
        let mut dropped = 0;
        for &(a, b) in segments {
            let xs = x.select_rows(&(a..b).collect::<Vec<_>>());
            match fit_armax_segment(&y[a..b], &xs, cfg.ar_order, cfg.ma_order, cfg.long_ar_order) {
                Ok(m) if m.is_stable() => models.push(m),
                Ok(_) => {
                    log::warn!("ARMAX fit on steps {a}..{b} is unstable; segment dropped");
                    dropped += 1;
                }
                Err(e) => {
                    log::warn!("ARMAX fit on steps {a}..{b} failed: {e}; segment dropped");
                    dropped += 1;
                }
            }
        }
        if models.is_empty() {
            return Err(Error::Numeric("no stable ARMAX model in any training segment".into()));
        }
        Ok(Self { models, dropped })
    }

    pub fn armax_ensemble_forecast(
        &self,
        y: &[T],
        x: &Matrix<T>,
        t: usize,
        h: usize,
        filter_len: usize,
    ) -> Result<Vec<T>> {
        let mut acc = vec![T::zero(); h];
        for m in &self.models {
            for (a, v) in acc.iter_mut().zip(m.forecast(y, x, t, h, filter_len)?) {
                *a += v;
            }
        }
        let n = T::from_usize_lossy(self.models.len());
        Ok(acc.into_iter().map(|v| v / n).collect())
    }
}
