//! Linear removal of weather-driven load before exponential smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::scalar::Scalar;

/// Coefficients of `y ≈ β₀·GHI + β₁·T + β₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetrendModel<T> {
    pub beta: [T; 3],
}

impl<T: Scalar> DetrendModel<T> {
    /// Trend value for one instant.
    pub fn trend(&self, ghi: T, temp: T) -> T {
        self.beta[0] * ghi + self.beta[1] * temp + self.beta[2]
    }

    pub fn apply(&self, y: &[T], ghi: &[T], temp: &[T]) -> Vec<T> {
        y.iter().zip(ghi).zip(temp).map(|((&y, &g), &t)| y - self.trend(g, t)).collect()
    }

    pub fn invert(&self, r: &[T], ghi: &[T], temp: &[T]) -> Vec<T> {
        r.iter().zip(ghi).zip(temp).map(|((&r, &g), &t)| r + self.trend(g, t)).collect()
    }
}

/// Ordinary least squares of `y` on `[GHI, T, 1]`. Collinear regressors are
/// dropped (coefficient 0); the intercept is always kept.
pub fn fit_detrend<T: Scalar>(y: &[T], ghi: &[T], temp: &[T]) -> Result<DetrendModel<T>> {
    let n = y.len();
    if ghi.len() != n || temp.len() != n {
        return Err(Error::Dimension("detrend inputs differ in length".into()));
    }
    if n == 0 {
        return Err(Error::TooShort { needed: 1, available: 0 });
    }
    // Intercept first so that the pivoting never drops it.
    let x = Matrix::from_fn(n, 3, |i, j| match j {
        0 => T::one(),
        1 => ghi[i],
        _ => temp[i],
    });
    let ls = least_squares(&x, y, T::epsilon().sqrt() * T::lit(0.01))?;
    let c = ls.coefficients;
    Ok(DetrendModel { beta: [c[1], c[2], c[0]] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn recovers_exact_linear_law() {
        let temp: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 10.0).collect();
        let ghi = vec![0.0; 50];
        let y: Vec<f64> = temp.iter().map(|t| 2.0 * t + 5.0).collect();
        let m = fit_detrend(&y, &ghi, &temp).unwrap();
        assert!(m.beta[0].abs() < 1e-12);
        assert!((m.beta[1] - 2.0).abs() < 1e-10);
        assert!((m.beta[2] - 5.0).abs() < 1e-10);
    }

    #[test]
    fn uncorrelated_target_has_small_slopes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 5000;
        let temp: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..25.0)).collect();
        let ghi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..800.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(50.0..100.0)).collect();
        let m = fit_detrend(&y, &ghi, &temp).unwrap();
        // Slope standard errors are ≈ σ_y/(σ_x·√n): about 0.04 and 0.0014.
        assert!(m.beta[1].abs() < 0.15, "{:?}", m.beta);
        assert!(m.beta[0].abs() < 0.005, "{:?}", m.beta);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..30).map(|_| rng.gen()).collect();
        let g: Vec<f64> = (0..30).map(|_| rng.gen()).collect();
        let t: Vec<f64> = (0..30).map(|_| rng.gen()).collect();
        let m = fit_detrend(&y, &g, &t).unwrap();
        let back = m.invert(&m.apply(&y, &g, &t), &g, &t);
        for (a, b) in back.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
