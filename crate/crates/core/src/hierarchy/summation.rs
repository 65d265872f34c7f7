use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Aggregation structure: a binary summation matrix `S` of shape
/// `n × n_bottom` whose rows are ordered top level first, bottom last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hierarchy {
    n_bottom: usize,
    /// Row-major 0/1 entries of `S`.
    summation: Vec<u8>,
    /// Aggregation level of every row (0 = top, last = bottom).
    level_index: Vec<usize>,
}

impl Hierarchy {
    /// Builds `S = [1ᵀ; I_g1 ⊗ 1ᵀ; …; I_n_bottom]` for intermediate levels
    /// with `group_counts` groups each (e.g. `[2, 4]`).
    pub fn build(n_bottom: usize, group_counts: &[usize]) -> Result<Self> {
        if n_bottom == 0 {
            return Err(Error::HierarchyPlan("at least one bottom series is required".into()));
        }
        for &g in group_counts {
            if g == 0 || !n_bottom.is_multiple_of(g) {
                return Err(Error::HierarchyPlan(format!(
                    "{n_bottom} bottom series cannot be split into {g} equal groups"
                )));
            }
        }
        let mut summation = Vec::new();
        let mut level_index = Vec::new();
        summation.extend(std::iter::repeat_n(1u8, n_bottom));
        level_index.push(0);
        for (lvl, &g) in group_counts.iter().enumerate() {
            let width = n_bottom / g;
            for grp in 0..g {
                summation.extend((0..n_bottom).map(|j| u8::from(j / width == grp)));
                level_index.push(lvl + 1);
            }
        }
        let bottom_level = group_counts.len() + 1;
        for i in 0..n_bottom {
            summation.extend((0..n_bottom).map(|j| u8::from(i == j)));
            level_index.push(bottom_level);
        }
        Ok(Self { n_bottom, summation, level_index })
    }

    /// Validates an arbitrary 0/1 summation matrix whose trailing rows are the identity.
    pub fn from_rows(rows: &[Vec<u8>], level_index: Vec<usize>) -> Result<Self> {
        let n_bottom = rows.first().map_or(0, Vec::len);
        if n_bottom == 0 || rows.len() < n_bottom || level_index.len() != rows.len() {
            return Err(Error::HierarchyPlan("summation matrix has inconsistent shape".into()));
        }
        let n_upper = rows.len() - n_bottom;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_bottom || r.iter().any(|&v| v > 1) {
                return Err(Error::HierarchyPlan(format!("row {i} is not a 0/1 row of width {n_bottom}")));
            }
            if i >= n_upper && r.iter().enumerate().any(|(j, &v)| v != u8::from(j == i - n_upper)) {
                return Err(Error::HierarchyPlan("bottom block of S must be the identity".into()));
            }
        }
        Ok(Self { n_bottom, summation: rows.concat(), level_index })
    }

    pub fn n_bottom(&self) -> usize {
        self.n_bottom
    }

    pub fn n_series(&self) -> usize {
        self.level_index.len()
    }

    pub fn n_upper(&self) -> usize {
        self.n_series() - self.n_bottom
    }

    pub fn level_index(&self) -> &[usize] {
        &self.level_index
    }

    pub fn n_levels(&self) -> usize {
        self.level_index.last().map_or(0, |&l| l + 1)
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> u8 {
        self.summation[row * self.n_bottom + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.summation[row * self.n_bottom..(row + 1) * self.n_bottom]
    }

    pub fn summation_matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_fn(self.n_series(), self.n_bottom, |i, j| {
            if self.entry(i, j) == 1 {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Upper block `A` of `S` (rows of the aggregated series).
    pub fn upper_block<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_fn(self.n_upper(), self.n_bottom, |i, j| {
            if self.entry(i, j) == 1 {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Names for every row given the bottom series names.
    pub fn series_names(&self, bottom: &[String]) -> Result<Vec<String>> {
        if bottom.len() != self.n_bottom {
            return Err(Error::Dimension(format!(
                "{} bottom names for {} bottom series",
                bottom.len(),
                self.n_bottom
            )));
        }
        let mut names = Vec::with_capacity(self.n_series());
        let mut counter = vec![0usize; self.n_levels()];
        for i in 0..self.n_upper() {
            let lvl = self.level_index[i];
            names.push(if lvl == 0 {
                "total".to_string()
            } else {
                format!("agg{}_{}", lvl, counter[lvl])
            });
            counter[lvl] += 1;
        }
        names.extend(bottom.iter().cloned());
        Ok(names)
    }

    /// Aggregates a vector of bottom values to all `n` series.
    pub fn aggregate_vec<T: Scalar>(&self, bottom: &[T]) -> Vec<T> {
        assert_eq!(bottom.len(), self.n_bottom, "aggregate_vec: bottom length");
        (0..self.n_series())
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(bottom)
                    .filter(|(&s, _)| s == 1)
                    .fold(T::zero(), |acc, (_, &b)| acc + b)
            })
            .collect()
    }
}

/// `build_summation_matrix` under its operational name.
pub fn build_summation_matrix(n_bottom: usize, group_counts: &[usize]) -> Result<Hierarchy> {
    Hierarchy::build(n_bottom, group_counts)
}

/// Expands a `T × n_bottom` matrix of bottom series to all `n` series
/// (`bottom · Sᵀ`).
pub fn aggregate_bottom<T: Scalar>(bottom: &Matrix<T>, hierarchy: &Hierarchy) -> Result<Matrix<T>> {
    if bottom.ncols() != hierarchy.n_bottom() {
        return Err(Error::Dimension(format!(
            "bottom matrix has {} columns, hierarchy expects {}",
            bottom.ncols(),
            hierarchy.n_bottom()
        )));
    }
    let mut out = Matrix::zeros(bottom.nrows(), hierarchy.n_series());
    for t in 0..bottom.nrows() {
        let agg = hierarchy.aggregate_vec(bottom.row(t));
        out.row_mut(t).copy_from_slice(&agg);
    }
    Ok(out)
}
