//! Base-error covariance estimators: Ledoit–Wolf shrinkage and the
//! graphical lasso.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Cholesky, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMethod {
    LedoitWolf,
    GraphicalLasso,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate<T> {
    pub w: Matrix<T>,
    pub method: CovarianceMethod,
    /// Shrinkage intensity for Ledoit–Wolf, penalty for the graphical lasso.
    pub regularization: f64,
    /// Diagonal jitter added to reach positive definiteness (0 if none).
    pub jitter: f64,
}

/// Column means of `x` (`samples × n`).
fn column_means<T: Scalar>(x: &Matrix<T>) -> Vec<T> {
    let n = T::from_usize_lossy(x.nrows().max(1));
    let mut m = vec![T::zero(); x.ncols()];
    for row in x.rows_iter() {
        for (a, &v) in m.iter_mut().zip(row) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|a| *a /= n);
    m
}

fn centered<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let m = column_means(x);
    Matrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - m[j])
}

/// Maximum-likelihood sample covariance (divides by the sample count).
pub fn sample_covariance<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    if x.nrows() == 0 {
        return Err(Error::TooShort { needed: 1, available: 0 });
    }
    let xc = centered(x);
    let mut s = xc.transpose().matmul(&xc).scale(T::one() / T::from_usize_lossy(x.nrows()));
    s.symmetrize();
    Ok(s)
}

/// Adds `1e-8·trace/n` to the diagonal when the smallest eigenvalue is not
/// positive; returns the jitter added.
pub fn ensure_positive_definite<T: Scalar>(w: &mut Matrix<T>) -> f64 {
    let n = w.nrows();
    if n == 0 {
        return 0.0;
    }
    let min = symmetric_eigenvalues(w).first().copied().unwrap_or(T::zero());
    if min > T::zero() && Cholesky::new(w).is_ok() {
        return 0.0;
    }
    let scale = (w.trace() / T::from_usize_lossy(n)).abs().max(T::min_positive_value());
    let mut jitter = T::lit(1e-8) * scale;
    // A tiny bump may not cover a clearly negative eigenvalue.
    if min < T::zero() {
        jitter += -min;
    }
    for i in 0..n {
        w[(i, i)] += jitter;
    }
    log::warn!("covariance not positive definite; added {:e} to the diagonal", jitter.as_f64());
    jitter.as_f64()
}

/// Shrinks the sample covariance towards `μ·I`, `μ` its mean diagonal,
/// with the closed-form optimal intensity.
pub fn estimate_ledoit_wolf<T: Scalar>(errors: &Matrix<T>) -> Result<CovarianceEstimate<T>> {
    let (n, p) = errors.shape();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, available: n });
    }
    let x = centered(errors);
    let s = x.transpose().matmul(&x).scale(T::one() / T::from_usize_lossy(n));
    let (nf, pf) = (n as f64, p as f64);
    let mu = s.trace().as_f64() / pf;
    // Σ_k ‖x_k‖⁴ and ‖S‖_F².
    let fourth: f64 = x.rows_iter().map(|r| r.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().powi(2)).sum();
    let s_fro2: f64 = s.as_slice().iter().map(|v| v.as_f64().powi(2)).sum();
    let beta = ((fourth / nf - s_fro2) / nf / pf).max(0.0);
    let delta = (s_fro2 - 2.0 * mu * s.trace().as_f64() + pf * mu * mu) / pf;
    let shrinkage = if delta <= 0.0 { 0.0 } else { beta.min(delta) / delta };
    let (sh, m) = (T::lit(shrinkage), T::lit(mu));
    let mut w = Matrix::from_fn(p, p, |i, j| {
        let target = if i == j { m } else { T::zero() };
        (T::one() - sh) * s[(i, j)] + sh * target
    });
    w.symmetrize();
    let jitter = ensure_positive_definite(&mut w);
    Ok(CovarianceEstimate { w, method: CovarianceMethod::LedoitWolf, regularization: shrinkage, jitter })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlassoOptions {
    pub max_sweeps: usize,
    /// Convergence threshold on the duality gap, relative to `p`.
    pub tol: f64,
    pub lasso_max_iter: usize,
    pub lasso_tol: f64,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self { max_sweeps: 200, tol: 1e-6, lasso_max_iter: 1000, lasso_tol: 1e-10 }
    }
}

/// Default penalty: 1 % of the mean absolute off-diagonal sample covariance.
pub fn default_glasso_penalty<T: Scalar>(s: &Matrix<T>) -> f64 {
    let p = s.nrows();
    if p < 2 {
        return 0.0;
    }
    let total: f64 = (0..p).flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| s[(i, j)].as_f64().abs()).sum();
    0.01 * total / (p * (p - 1)) as f64
}

/// `tr(SΘ) − p + λ Σ_{i≠j} |Θ_ij|`.
fn duality_gap(s: &Matrix<f64>, theta: &Matrix<f64>, lambda: f64) -> f64 {
    let p = s.nrows();
    let mut tr = 0.0;
    let mut off = 0.0;
    for i in 0..p {
        for j in 0..p {
            tr += s[(i, j)] * theta[(j, i)];
            if i != j {
                off += theta[(i, j)].abs();
            }
        }
    }
    tr - p as f64 + lambda * off
}

/// Sparse inverse-covariance estimate by block coordinate descent on the
/// columns of the covariance, each solving a lasso problem; the diagonal
/// is not penalised. Returns the covariance `W = Θ⁻¹`.
pub fn estimate_graphical_lasso<T: Scalar>(
    errors: &Matrix<T>,
    lambda: Option<f64>,
    opts: &GlassoOptions,
) -> Result<CovarianceEstimate<T>> {
    let s = sample_covariance(errors)?;
    let lambda = lambda.unwrap_or_else(|| default_glasso_penalty(&s));
    let s64 = s.map(|v| v.as_f64());
    let (w, _theta) = graphical_lasso(&s64, lambda, opts)?;
    let mut w = w.map(T::lit);
    w.symmetrize();
    let jitter = ensure_positive_definite(&mut w);
    Ok(CovarianceEstimate { w, method: CovarianceMethod::GraphicalLasso, regularization: lambda, jitter })
}

/// Graphical lasso on a covariance matrix; returns `(W, Θ)`.
pub fn graphical_lasso(s: &Matrix<f64>, lambda: f64, opts: &GlassoOptions) -> Result<(Matrix<f64>, Matrix<f64>)> {
    let p = s.nrows();
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("graphical lasso penalty must be non-negative, got {lambda}")));
    }
    if (0..p).any(|i| !(s[(i, i)] > 0.0)) {
        return Err(Error::Numeric("sample covariance has a non-positive variance".into()));
    }
    if p == 1 {
        return Ok((s.clone(), Matrix::from_fn(1, 1, |_, _| 1.0 / s[(0, 0)])));
    }
    let mut w = s.clone();
    let mut beta = vec![vec![0.0; p - 1]; p];
    let mut theta = Matrix::zeros(p, p);
    let mut gap = f64::INFINITY;
    let others = |j: usize| (0..p).filter(move |&k| k != j);
    for sweep in 0..opts.max_sweeps {
        for j in 0..p {
            let idx: Vec<usize> = others(j).collect();
            let b = &mut beta[j];
            // Coordinate descent on ½βᵀW₁₁β − βᵀs₁₂ + λ‖β‖₁.
            for _ in 0..opts.lasso_max_iter {
                let mut max_step: f64 = 0.0;
                for (a, &ka) in idx.iter().enumerate() {
                    let mut r = s[(ka, j)];
                    for (c, &kc) in idx.iter().enumerate() {
                        if c != a {
                            r -= w[(ka, kc)] * b[c];
                        }
                    }
                    let new = soft_threshold(r, lambda) / w[(ka, ka)];
                    max_step = max_step.max((new - b[a]).abs());
                    b[a] = new;
                }
                if max_step < opts.lasso_tol {
                    break;
                }
            }
            for &ka in &idx {
                let v: f64 = idx.iter().enumerate().map(|(c, &kc)| w[(ka, kc)] * b[c]).sum();
                w[(ka, j)] = v;
                w[(j, ka)] = v;
            }
        }
        // Precision from the column regressions.
        for j in 0..p {
            let idx: Vec<usize> = others(j).collect();
            let w12b: f64 = idx.iter().enumerate().map(|(a, &ka)| w[(ka, j)] * beta[j][a]).sum();
            let t22 = 1.0 / (w[(j, j)] - w12b);
            theta[(j, j)] = t22;
            for (a, &ka) in idx.iter().enumerate() {
                theta[(ka, j)] = -beta[j][a] * t22;
            }
        }
        theta.symmetrize();
        gap = duality_gap(s, &theta, lambda);
        if gap.abs() < opts.tol * p as f64 {
            log::debug!("graphical lasso converged after {} sweeps (gap {gap:e})", sweep + 1);
            return Ok((w, theta));
        }
    }
    Err(Error::NonConvergence { sweeps: opts.max_sweeps, gap })
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}
