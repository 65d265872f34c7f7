//! Linear reconciliation: every method maps base forecasts `ŷ` (all `n`
//! series) to bottom forecasts `ỹ_b = P ŷ` and expands them with `S`.

use serde::{Deserialize, Serialize};

use super::covariance::ensure_positive_definite;
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::linalg::{Cholesky, Ldl, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconciliationMethod {
    Ols,
    #[serde(rename = "mint")]
    MinT,
    Bayes,
}

impl ReconciliationMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ols => "ols",
            Self::MinT => "mint",
            Self::Bayes => "bayes",
        }
    }

    pub fn needs_covariance(&self) -> bool {
        !matches!(self, Self::Ols)
    }
}

/// A fitted reconciliation map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection<T> {
    /// `n_bottom × n`.
    pub p: Matrix<T>,
    /// Posterior covariance of the bottom series (Bayesian method only).
    pub posterior_cov: Option<Matrix<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconciledForecastSet<T> {
    /// `rows × n_bottom`.
    pub bottom: Matrix<T>,
    /// `rows × n`, upper series first.
    pub all: Matrix<T>,
    pub posterior_cov: Option<Matrix<T>>,
}

/// Cholesky of a matrix that should be positive definite, jittering once
/// with a warning when it is not.
fn robust_cholesky<T: Scalar>(m: &Matrix<T>, what: &str) -> Result<Cholesky<T>> {
    match Cholesky::new(m) {
        Ok(c) => Ok(c),
        Err(_) => {
            let mut j = m.clone();
            j.symmetrize();
            let added = ensure_positive_definite(&mut j);
            log::warn!("{what} is ill-conditioned; solved with diagonal jitter {added:e}");
            Cholesky::new(&j)
        }
    }
}

fn check_w<T: Scalar>(w: &Matrix<T>, n: usize) -> Result<()> {
    if w.shape() != (n, n) {
        return Err(Error::Dimension(format!("covariance is {:?}, hierarchy has {n} series", w.shape())));
    }
    Ok(())
}

/// `P = (SᵀS)⁻¹Sᵀ`.
pub fn ols_projection<T: Scalar>(h: &Hierarchy) -> Result<Projection<T>> {
    let s: Matrix<T> = h.summation_matrix();
    let st = s.transpose();
    let c = robust_cholesky(&st.matmul(&s), "SᵀS")?;
    Ok(Projection { p: c.solve_mat(&st), posterior_cov: None })
}

/// `P = (SᵀW⁻¹S)⁻¹SᵀW⁻¹`.
pub fn mint_projection<T: Scalar>(h: &Hierarchy, w: &Matrix<T>) -> Result<Projection<T>> {
    check_w(w, h.n_series())?;
    let s: Matrix<T> = h.summation_matrix();
    let cw = robust_cholesky(w, "W")?;
    let winv_s = cw.solve_mat(&s);
    let mut m = s.transpose().matmul(&winv_s);
    m.symmetrize();
    let cm = robust_cholesky(&m, "SᵀW⁻¹S")?;
    Ok(Projection { p: cm.solve_mat(&winv_s.transpose()), posterior_cov: None })
}

/// Gaussian conditioning of the bottom forecasts on the upper ones:
/// `ỹ_b = ŷ_b + K(ŷ_u − Aŷ_b)` with `K = (Σ_bAᵀ − Cᵀ)V⁻¹`,
/// `V = AΣ_bAᵀ + Σ_u − CAᵀ − ACᵀ`, where `C` is the upper/bottom error
/// cross-covariance (zero unless `cross_covariance`).
pub fn bayes_projection<T: Scalar>(h: &Hierarchy, w: &Matrix<T>, cross_covariance: bool) -> Result<Projection<T>> {
    let n = h.n_series();
    check_w(w, n)?;
    let (nu, nb) = (h.n_upper(), h.n_bottom());
    let upper: Vec<usize> = (0..nu).collect();
    let bottom: Vec<usize> = (nu..n).collect();
    let sigma_b = w.select_rows(&bottom).select_cols(&bottom);
    if nu == 0 {
        return Ok(Projection { p: Matrix::identity(nb), posterior_cov: Some(sigma_b) });
    }
    let sigma_u = w.select_rows(&upper).select_cols(&upper);
    let a: Matrix<T> = h.upper_block();
    let c = if cross_covariance {
        w.select_rows(&upper).select_cols(&bottom)
    } else {
        Matrix::zeros(nu, nb)
    };
    let at = a.transpose();
    // G = Σ_bAᵀ − Cᵀ  (nb × nu)
    let g = sigma_b.matmul(&at).sub(&c.transpose());
    let ca = c.matmul(&at);
    let mut v = a.matmul(&sigma_b).matmul(&at).add(&sigma_u).sub(&ca).sub(&ca.transpose());
    v.symmetrize();
    let cv = robust_cholesky(&v, "innovation covariance")?;
    // K = G V⁻¹ = (V⁻¹ Gᵀ)ᵀ
    let k = cv.solve_mat(&g.transpose()).transpose();
    let ka = k.matmul(&a);
    let mut p = Matrix::zeros(nb, n);
    for i in 0..nb {
        for j in 0..nu {
            p[(i, j)] = k[(i, j)];
        }
        for j in 0..nb {
            let id = if i == j { T::one() } else { T::zero() };
            p[(i, nu + j)] = id - ka[(i, j)];
        }
    }
    let mut post = sigma_b.sub(&k.matmul(&g.transpose()));
    post.symmetrize();
    Ok(Projection { p, posterior_cov: Some(post) })
}

impl<T: Scalar> Projection<T> {
    /// Reconciles every row of `base` (`rows × n`).
    pub fn apply(&self, base: &Matrix<T>, h: &Hierarchy) -> Result<ReconciledForecastSet<T>> {
        if base.ncols() != self.p.ncols() || self.p.ncols() != h.n_series() {
            return Err(Error::Dimension(format!(
                "base forecasts have {} series, reconciliation expects {}",
                base.ncols(),
                self.p.ncols()
            )));
        }
        let bottom = base.matmul(&self.p.transpose());
        let all = bottom.matmul(&h.summation_matrix::<T>().transpose());
        Ok(ReconciledForecastSet { bottom, all, posterior_cov: self.posterior_cov.clone() })
    }

    /// Reconciles one vector of `n` base forecasts; returns all `n` series.
    pub fn apply_vec(&self, base: &[T], h: &Hierarchy) -> Vec<T> {
        h.aggregate_vec(&self.p.mul_vec(base))
    }
}

/// Solves the normal equations `SᵀS ỹ_b = Sᵀŷ` row by row instead of going
/// through `P`, which avoids rounding on small integer hierarchies.
pub fn reconcile_ols<T: Scalar>(base: &Matrix<T>, h: &Hierarchy) -> Result<ReconciledForecastSet<T>> {
    if base.ncols() != h.n_series() {
        return Err(Error::Dimension(format!(
            "base forecasts have {} series, hierarchy has {}",
            base.ncols(),
            h.n_series()
        )));
    }
    let s: Matrix<T> = h.summation_matrix();
    let st = s.transpose();
    let ldl = Ldl::new(&st.matmul(&s))?;
    let mut bottom = Matrix::zeros(base.nrows(), h.n_bottom());
    for (r, row) in base.rows_iter().enumerate() {
        bottom.row_mut(r).copy_from_slice(&ldl.solve_vec(&st.mul_vec(row)));
    }
    let all = bottom.matmul(&st);
    Ok(ReconciledForecastSet { bottom, all, posterior_cov: None })
}

pub fn reconcile_mint<T: Scalar>(base: &Matrix<T>, h: &Hierarchy, w: &Matrix<T>) -> Result<ReconciledForecastSet<T>> {
    mint_projection(h, w)?.apply(base, h)
}

pub fn reconcile_bayes<T: Scalar>(
    base: &Matrix<T>,
    h: &Hierarchy,
    w: &Matrix<T>,
    cross_covariance: bool,
) -> Result<ReconciledForecastSet<T>> {
    bayes_projection(h, w, cross_covariance)?.apply(base, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Hierarchy {
        Hierarchy::build(2, &[]).unwrap()
    }

    #[test]
    fn worked_two_leaf_example() {
        let base: Matrix<f64> = Matrix::from_rows(&[[10.0, 3.0, 4.0]]).unwrap();
        let r = reconcile_ols(&base, &tiny()).unwrap();
        let expect = [9.0, 4.0, 5.0];
        for (a, b) in r.all.row(0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = Matrix::identity(3);
        let b = reconcile_bayes(&base, &tiny(), &w, false).unwrap();
        assert!((b.bottom[(0, 0)] - 4.0).abs() < 1e-12 && (b.bottom[(0, 1)] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn distrusted_top_leaves_bottom_untouched() {
        let base: Matrix<f64> = Matrix::from_rows(&[[10.0, 3.0, 4.0]]).unwrap();
        let w = Matrix::diagonal(&[1e6, 1.0, 1.0]);
        let r = reconcile_mint(&base, &tiny(), &w).unwrap();
        assert!((r.bottom[(0, 0)] - 3.0).abs() < 1e-4);
        assert!((r.bottom[(0, 1)] - 4.0).abs() < 1e-4);
    }

    #[test]
    fn all_zero_in_all_zero_out() {
        let h = Hierarchy::build(4, &[2]).unwrap();
        let r = reconcile_ols(&Matrix::<f64>::zeros(3, 7), &h).unwrap();
        assert!(r.all.as_slice().iter().all(|&v| v == 0.0));
    }
}
