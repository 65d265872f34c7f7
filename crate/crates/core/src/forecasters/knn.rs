//! Inverse-distance weighted nearest-neighbour regression.
//!
//! Every step ahead has its own target column but all of them share the
//! feature vector, so the neighbour search is done once per query and reused
//! for each step-ahead model.

use serde::{Deserialize, Serialize};

use super::quantiles::weighted_quantiles;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{cmp, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 50 }
    }
}

/// Per-feature centring and scaling estimated on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    /// Constant features get unit scale.
    pub fn fit(x: &Matrix<T>) -> Self {
        let (n, p) = x.shape();
        let nn = T::from_usize_lossy(n.max(1));
        let mut mean = vec![T::zero(); p];
        for row in x.rows_iter() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nn);
        let mut var = vec![T::zero(); p];
        for row in x.rows_iter() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / nn).sqrt();
                if sd > T::epsilon() {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform_row(&self, row: &[T]) -> Vec<T> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((&v, &m), &s)| (v - m) / s).collect()
    }

    pub fn transform(&self, x: &Matrix<T>) -> Matrix<T> {
        let data: Vec<T> = x.rows_iter().flat_map(|r| self.transform_row(r)).collect();
        Matrix::from_vec(x.nrows(), x.ncols(), data).expect("same shape")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel<T> {
    pub k: usize,
    pub standardizer: Standardizer<T>,
    /// Standardized training features.
    pub features: Matrix<T>,
    /// Training targets, one column per step ahead.
    pub targets: Matrix<T>,
}

/// Neighbour indices with their weights (summing to one).
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbours<T> {
    pub index: Vec<usize>,
    pub weight: Vec<T>,
}

pub fn fit_knn<T: Scalar>(x: &Matrix<T>, y: &Matrix<T>, k: usize) -> Result<KnnModel<T>> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!("{} feature rows, {} target rows", x.nrows(), y.nrows())));
    }
    if x.nrows() == 0 || k == 0 {
        return Err(Error::InvalidArgument("nearest neighbours need at least one row and k ≥ 1".into()));
    }
    let k = if k > x.nrows() {
        log::warn!("k = {k} exceeds the {} training rows; clamped", x.nrows());
        x.nrows()
    } else {
        k
    };
    let standardizer = Standardizer::fit(x);
    Ok(KnnModel { k, features: standardizer.transform(x), standardizer, targets: y.clone() })
}

impl<T: Scalar> KnnModel<T> {
    /// The `k` nearest training rows to a raw query among those not
    /// rejected by `exclude`. Exact matches take all the weight.
    pub fn neighbours(&self, query: &[T], exclude: impl Fn(usize) -> bool) -> Result<Neighbours<T>> {
        let q = self.standardizer.transform_row(query);
        let mut d: Vec<(T, usize)> = self
            .features
            .rows_iter()
            .enumerate()
            .filter(|(i, _)| !exclude(*i))
            .map(|(i, row)| (row.iter().zip(&q).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>(), i))
            .collect();
        if d.is_empty() {
            return Err(Error::Data("no admissible neighbours".into()));
        }
        let k = self.k.min(d.len());
        let by = |a: &(T, usize), b: &(T, usize)| cmp(&a.0, &b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, by);
            d.truncate(k);
        }
        d.sort_by(by);
        let exact: Vec<usize> = d.iter().filter(|(dist, _)| *dist == T::zero()).map(|&(_, i)| i).collect();
        if !exact.is_empty() {
            let w = T::one() / T::from_usize_lossy(exact.len());
            return Ok(Neighbours { weight: vec![w; exact.len()], index: exact });
        }
        let inv: Vec<T> = d.iter().map(|(dist, _)| T::one() / dist.sqrt()).collect();
        let total: T = inv.iter().copied().sum();
        Ok(Neighbours { index: d.iter().map(|&(_, i)| i).collect(), weight: inv.into_iter().map(|w| w / total).collect() })
    }

    /// Weighted mean of the neighbours' targets for one step ahead.
    pub fn predict_step(&self, nb: &Neighbours<T>, j: usize) -> T {
        nb.index.iter().zip(&nb.weight).map(|(&i, &w)| w * self.targets[(i, j)]).sum()
    }

    /// Point forecast (`horizon`) and fan (`horizon × alphas`) for a raw query.
    pub fn knn_forecast(&self, query: &[T], alphas: &[f64]) -> Result<(Vec<T>, Vec<T>)> {
        let nb = self.neighbours(query, |_| false)?;
        Ok(self.forecast_with(&nb, alphas))
    }

    pub fn forecast_with(&self, nb: &Neighbours<T>, alphas: &[f64]) -> (Vec<T>, Vec<T>) {
        let h = self.targets.ncols();
        let mut point = Vec::with_capacity(h);
        let mut fan = Vec::with_capacity(h * alphas.len());
        let mut vals = vec![T::zero(); nb.index.len()];
        for j in 0..h {
            point.push(self.predict_step(nb, j));
            for (v, &i) in vals.iter_mut().zip(&nb.index) {
                *v = self.targets[(i, j)];
            }
            fan.extend(weighted_quantiles(&vals, &nb.weight, alphas));
        }
        (point, fan)
    }
}
