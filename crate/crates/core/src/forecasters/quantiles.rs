//! Quantile grids, residual banks and forecast containers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{cmp, Scalar};

/// Ordered probability levels of a quantile fan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileGrid {
    alphas: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidArgument("quantile grid is empty".into()));
        }
        if alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::InvalidArgument("quantile levels must lie in (0, 1)".into()));
        }
        if alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("quantile levels must be strictly increasing".into()));
        }
        Ok(Self { alphas })
    }

    /// `n` evenly spaced levels from `lo` to `hi` inclusive, rounded to 12
    /// decimals so that e.g. 0.23 prints as 0.23.
    pub fn evenly_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let round = |x: f64| (x * 1e12).round() / 1e12;
        let alphas = match n {
            0 => Vec::new(),
            1 => vec![round(0.5 * (lo + hi))],
            _ => (0..n).map(|i| round(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect(),
        };
        Self::new(alphas)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn position(&self, alpha: f64) -> Option<usize> {
        self.alphas.iter().position(|&a| (a - alpha).abs() < 1e-12)
    }
}

impl Default for QuantileGrid {
    fn default() -> Self {
        Self::evenly_spaced(0.05, 0.95, 11).expect("valid default grid")
    }
}

impl TryFrom<Vec<f64>> for QuantileGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileGrid> for Vec<f64> {
    fn from(g: QuantileGrid) -> Self {
        g.alphas
    }
}

/// Linear-interpolation quantile of an ascending sample (the common
/// "type 7" definition: position `(n − 1)·p`).
pub fn sorted_quantile<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let pos = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let w = T::lit(pos - lo as f64);
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

/// Quantiles of an unsorted sample at each level.
pub fn empirical_quantiles<T: Scalar>(sample: &[T], alphas: &[f64]) -> Vec<T> {
    let mut s = sample.to_vec();
    s.sort_by(cmp);
    alphas.iter().map(|&a| sorted_quantile(&s, a)).collect()
}

/// Weighted quantiles: values sorted, each placed at the midpoint of its
/// cumulative-weight interval, linear interpolation in between and clamping
/// outside. With equal weights this is the Hazen definition.
pub fn weighted_quantiles<T: Scalar>(values: &[T], weights: &[T], alphas: &[f64]) -> Vec<T> {
    assert_eq!(values.len(), weights.len());
    assert!(!values.is_empty(), "weighted quantile of empty sample");
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > T::zero()).collect();
    if idx.is_empty() {
        idx = (0..values.len()).collect();
    }
    idx.sort_by(|&a, &b| cmp(&values[a], &values[b]));
    let uniform = weights.iter().all(|w| *w <= T::zero());
    let weight = |i: usize| if uniform { 1.0 } else { weights[i].as_f64() };
    let total: f64 = idx.iter().map(|&i| weight(i)).sum();
    let mut pos = Vec::with_capacity(idx.len());
    let mut acc = 0.0;
    for &i in &idx {
        let w = weight(i) / total;
        pos.push(acc + 0.5 * w);
        acc += w;
    }
    alphas
        .iter()
        .map(|&a| {
            let k = pos.partition_point(|&p| p < a);
            if k == 0 {
                values[idx[0]]
            } else if k == pos.len() {
                values[idx[pos.len() - 1]]
            } else {
                let (p0, p1) = (pos[k - 1], pos[k]);
                let (v0, v1) = (values[idx[k - 1]], values[idx[k]]);
                let w = if p1 > p0 { (a - p0) / (p1 - p0) } else { 0.0 };
                v0 + T::lit(w) * (v1 - v0)
            }
        })
        .collect()
}

/// Sorts every fan in place; `fans` holds consecutive blocks of `width`.
pub fn repair_crossings<T: Scalar>(fans: &mut [T], width: usize) {
    if width == 0 {
        return;
    }
    for fan in fans.chunks_mut(width) {
        if fan.windows(2).any(|w| w[1] < w[0]) {
            fan.sort_by(cmp);
        }
    }
}

/// Training residuals `e = ŷ − y` grouped by step ahead and by the
/// step of day of the target instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBank<T> {
    horizon: usize,
    steps_per_day: usize,
    /// Sorted residuals of cell `(j, d)` at `j * steps_per_day + d`, `j` zero-based.
    cells: Vec<Vec<T>>,
    pooled: Vec<Vec<T>>,
}

impl<T: Scalar> ErrorBank<T> {
    pub fn new(horizon: usize, steps_per_day: usize) -> Self {
        Self {
            horizon,
            steps_per_day,
            cells: vec![Vec::new(); horizon * steps_per_day],
            pooled: vec![Vec::new(); horizon],
        }
    }

    /// Bank from a `rows × horizon` residual matrix whose row `r` was issued
    /// at step of day `issue_step_of_day[r]`.
    pub fn from_residuals(residuals: &Matrix<T>, issue_step_of_day: &[usize], steps_per_day: usize) -> Self {
        let mut bank = Self::new(residuals.ncols(), steps_per_day);
        for (r, &d0) in issue_step_of_day.iter().enumerate() {
            for (j, &e) in residuals.row(r).iter().enumerate() {
                bank.push(j, (d0 + j + 1) % steps_per_day, e);
            }
        }
        bank.finish();
        bank
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Adds one residual; call [`finish`](Self::finish) before querying.
    pub fn push(&mut self, step_ahead: usize, target_step_of_day: usize, e: T) {
        self.cells[step_ahead * self.steps_per_day + target_step_of_day].push(e);
        self.pooled[step_ahead].push(e);
    }

    pub fn finish(&mut self) {
        for c in self.cells.iter_mut().chain(self.pooled.iter_mut()) {
            c.sort_by(cmp);
        }
    }

    pub fn cell(&self, step_ahead: usize, target_step_of_day: usize) -> &[T] {
        &self.cells[step_ahead * self.steps_per_day + target_step_of_day]
    }

    pub fn populated_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_empty()).count()
    }

    /// Additive offsets `q_α(y − ŷ)` for one cell, falling back to the
    /// pooled residuals of that step ahead when the cell is empty.
    pub fn offsets(&self, step_ahead: usize, target_step_of_day: usize, alphas: &[f64]) -> Result<Vec<T>> {
        let mut cell = self.cell(step_ahead, target_step_of_day);
        if cell.is_empty() {
            cell = &self.pooled[step_ahead];
            if cell.is_empty() {
                return Err(Error::Data(format!("no training residuals for step ahead {}", step_ahead + 1)));
            }
            log::warn!(
                "empty residual cell (h={}, d={}); using all residuals of that step ahead",
                step_ahead + 1,
                target_step_of_day
            );
        }
        // With e = ŷ − y, q_α(y − ŷ) = −q_{1−α}(e).
        Ok(alphas.iter().map(|&a| -sorted_quantile(cell, 1.0 - a)).collect())
    }

    /// Quantile fan (`horizon × alphas`, row-major) around `point`, a forecast
    /// issued at step of day `issue_step_of_day`.
    pub fn fan(&self, point: &[T], issue_step_of_day: usize, alphas: &[f64]) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(point.len() * alphas.len());
        for (j, &p) in point.iter().enumerate() {
            let d = (issue_step_of_day + j + 1) % self.steps_per_day;
            out.extend(self.offsets(j, d, alphas)?.into_iter().map(|o| p + o));
        }
        repair_crossings(&mut out, alphas.len());
        Ok(out)
    }
}

/// Stacked out-of-sample forecasts of one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult<T> {
    pub series: String,
    pub alphas: Vec<f64>,
    pub issue_index: Vec<usize>,
    pub issue_step_of_day: Vec<usize>,
    pub fold: Vec<usize>,
    /// `rows × horizon`.
    pub point: Matrix<T>,
    /// Measured values at the forecast targets, `rows × horizon`.
    pub observed: Matrix<T>,
    /// `rows × horizon × alphas`, row-major.
    pub quantiles: Vec<T>,
}

impl<T: Scalar> ForecastResult<T> {
    pub fn rows(&self) -> usize {
        self.point.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.point.ncols()
    }

    /// Fan of row `r` at step ahead `j` (zero-based).
    pub fn fan(&self, r: usize, j: usize) -> &[T] {
        let q = self.alphas.len();
        let at = (r * self.horizon() + j) * q;
        &self.quantiles[at..at + q]
    }

    /// Errors `ŷ − y`.
    pub fn errors(&self) -> Matrix<T> {
        self.point.sub(&self.observed)
    }

    pub fn is_monotone(&self) -> bool {
        self.quantiles.chunks(self.alphas.len().max(1)).all(|f| f.windows(2).all(|w| w[0] <= w[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn default_grid() {
        let g = QuantileGrid::default();
        assert_eq!(g.len(), 11);
        assert!((g.alphas()[0] - 0.05).abs() < 1e-15);
        assert!((g.alphas()[10] - 0.95).abs() < 1e-15);
        assert!((g.alphas()[5] - 0.5).abs() < 1e-15);
        assert!(QuantileGrid::new(vec![0.5, 0.4]).is_err());
        assert!(QuantileGrid::new(vec![0.0]).is_err());
    }

    #[test]
    fn median_of_symmetric_cell_is_zero() {
        let mut b = ErrorBank::<f64>::new(1, 4);
        for e in [-1.0, 0.0, 1.0] {
            b.push(0, 2, e);
        }
        b.finish();
        assert_eq!(b.offsets(0, 2, &[0.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_residuals_collapse_fan() {
        let res = Matrix::<f64>::zeros(5, 3);
        let b = ErrorBank::from_residuals(&res, &[0, 1, 2, 3, 0], 4);
        let fan = b.fan(&[1.0, 2.0, 3.0], 0, QuantileGrid::default().alphas()).unwrap();
        for (j, chunk) in fan.chunks(11).enumerate() {
            assert!(chunk.iter().all(|&v| v == (j + 1) as f64));
        }
    }

    #[test]
    fn gaussian_shift_at_95() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut b = ErrorBank::<f64>::new(1, 1);
        for _ in 0..10_000 {
            let e: f64 = StandardNormal.sample(&mut rng);
            b.push(0, 0, e);
        }
        b.finish();
        let s = b.offsets(0, 0, &[0.95]).unwrap()[0];
        assert!((s - 1.645).abs() < 0.05, "{s}");
    }

    #[test]
    fn empty_cell_uses_pooled() {
        let mut b = ErrorBank::<f64>::new(1, 4);
        b.push(0, 1, 2.0);
        b.finish();
        assert_eq!(b.offsets(0, 3, &[0.5]).unwrap(), vec![-2.0]);
        let empty = ErrorBank::<f64>::new(1, 4);
        assert!(empty.offsets(0, 0, &[0.5]).is_err());
    }

    #[test]
    fn weighted_quantile_cases() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let w = [1.0; 4];
        assert_eq!(weighted_quantiles(&v, &w, &[0.5]), vec![2.5]);
        assert_eq!(weighted_quantiles(&v, &w, &[0.01, 0.99]), vec![1.0, 4.0]);
        // All mass on one value.
        assert_eq!(weighted_quantiles(&[5.0, 9.0], &[1.0, 0.0], &[0.2, 0.8]), vec![5.0, 5.0]);
    }

    #[test]
    fn type7_quantile() {
        assert_eq!(sorted_quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert!((sorted_quantile(&[0.0f64, 10.0], 0.95) - 9.5).abs() < 1e-12);
        assert_eq!(empirical_quantiles(&[3.0, 1.0, 2.0], &[0.0, 1.0]), vec![1.0, 3.0]);
    }

    #[test]
    fn crossings_are_sorted_away() {
        let mut f = vec![1.0, 3.0, 2.0, 0.0, 1.0, 2.0];
        repair_crossings(&mut f, 3);
        assert_eq!(f, vec![1.0, 2.0, 3.0, 0.0, 1.0, 2.0]);
    }
}
