//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Shape-preserving cubic interpolant through strictly increasing knots.
#[derive(Clone, Debug)]
pub struct Pchip<T> {
    x: Vec<T>,
    y: Vec<T>,
    d: Vec<T>,
}

fn same_sign<T: Scalar>(a: T, b: T) -> bool {
    (a > T::zero() && b > T::zero()) || (a < T::zero() && b < T::zero())
}

fn end_slope<T: Scalar>(h0: T, h1: T, m0: T, m1: T) -> T {
    let three = T::lit(3.0);
    let d = ((T::lit(2.0) * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if !same_sign(d, m0) {
        T::zero()
    } else if !same_sign(m0, m1) && d.abs() > three * m0.abs() {
        three * m0
    } else {
        d
    }
}

impl<T: Scalar> Pchip<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InvalidArgument("pchip needs at least two (x, y) pairs".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("pchip knots must be strictly increasing".into()));
        }
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![T::zero(); n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if same_sign(m[k - 1], m[k]) {
                    let w1 = T::lit(2.0) * h[k] + h[k - 1];
                    let w2 = h[k] + T::lit(2.0) * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn slopes(&self) -> &[T] {
        &self.d
    }

    /// Evaluates the interpolant; values outside the knot range are clamped
    /// to the end intervals' cubics.
    pub fn eval(&self, xq: T) -> T {
        let n = self.x.len();
        let k = match self.x.binary_search_by(|v| crate::scalar::cmp(v, &xq)) {
            Ok(i) => return self.y[i],
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (xq - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

/// Gap-free segment produced by [`fill_gaps_pchip`].
#[derive(Clone, Debug, PartialEq)]
pub struct FilledSeries<T> {
    /// Index of `values[0]` in the input series.
    pub offset: usize,
    pub values: Vec<T>,
    pub interpolated: usize,
}

/// Fills interior gaps with PCHIP through all observed points. Leading and
/// trailing gaps are trimmed rather than extrapolated.
pub fn fill_gaps_pchip<T: Scalar>(series: &[Option<T>]) -> Result<FilledSeries<T>> {
    let first = series.iter().position(Option::is_some);
    let last = series.iter().rposition(Option::is_some);
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::Data("series has no observed values".into()));
    };
    let window = &series[first..=last];
    let (xs, ys): (Vec<T>, Vec<T>) = window
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (T::from_usize_lossy(i), v)))
        .unzip();
    if xs.len() == window.len() {
        return Ok(FilledSeries { offset: first, values: ys, interpolated: 0 });
    }
    let interp = Pchip::new(xs, ys)?;
    let mut interpolated = 0;
    let values = window
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.unwrap_or_else(|| {
                interpolated += 1;
                interp.eval(T::from_usize_lossy(i))
            })
        })
        .collect();
    Ok(FilledSeries { offset: first, values, interpolated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_ramp_is_reproduced() {
        let s: Vec<Option<f64>> =
            (0..12).map(|i| if (4..7).contains(&i) { None } else { Some(2.0 * i as f64 + 1.0) }).collect();
        let f = fill_gaps_pchip(&s).unwrap();
        assert_eq!(f.interpolated, 3);
        for (i, v) in f.values.iter().enumerate() {
            assert!((v - (2.0 * i as f64 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_neighbors_give_monotone_fill() {
        let raw = [0.0, 0.1, 0.5, f64::NAN, f64::NAN, f64::NAN, 5.0, 5.2, 9.0];
        let s: Vec<Option<f64>> = raw.iter().map(|&v| (!v.is_nan()).then_some(v)).collect();
        let f = fill_gaps_pchip(&s).unwrap();
        assert!(f.values.windows(2).all(|w| w[1] >= w[0]), "{:?}", f.values);
        assert!(f.values[3..6].iter().all(|&v| (0.5..=5.0).contains(&v)));
    }

    #[test]
    fn single_gap_between_flat_neighbors() {
        // Outer slopes are flat so both knot slopes vanish and the Hermite
        // midpoint is the average.
        let s = [Some(2.0f64), Some(2.0), None, Some(4.0), Some(4.0)];
        let f = fill_gaps_pchip(&s).unwrap();
        assert!((2.0..=4.0).contains(&f.values[2]));
        assert!((f.values[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_gaps_are_trimmed() {
        let s = [None, Some(1.0), None, Some(3.0), None, None];
        let f = fill_gaps_pchip(&s).unwrap();
        assert_eq!(f.offset, 1);
        assert_eq!(f.values.len(), 3);
        assert!(fill_gaps_pchip::<f64>(&[None, None]).is_err());
    }
}
