//! Seasonal-daily persistence: each target repeats the value measured at
//! the same instant one day earlier.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Forecasts `y[t+1] … y[t+h]` from `y` issued at index `t`:
/// `ŷ[t+j] = y[t+j−p·⌈j/p⌉]` with `p = steps_per_day`.
pub fn persistence_forecast<T: Scalar>(y: &[T], t: usize, h: usize, steps_per_day: usize) -> Result<Vec<T>> {
    if steps_per_day == 0 {
        return Err(Error::InvalidArgument("steps per day must be positive".into()));
    }
    if t >= y.len() {
        return Err(Error::InvalidArgument(format!("issue index {t} outside series of {}", y.len())));
    }
    (1..=h)
        .map(|j| {
            let lag = steps_per_day * j.div_ceil(steps_per_day);
            (t + j).checked_sub(lag).map(|i| y[i]).ok_or(Error::TooShort { needed: lag, available: t + j })
        })
        .collect()
}
