//! Causal embedding of a frame into regressor / target Hankel matrices.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::frame::{CalendarFeature, TimeSeriesFrame};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// An extra regressor column; `embedded = false` keeps only its value at the issue time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regressor {
    pub column: String,
    #[serde(default = "yes")]
    pub embedded: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSpec {
    /// Steps ahead to forecast.
    pub horizon: usize,
    /// History window length; the window is the `embed` instants ending at the issue time.
    pub embed: usize,
    /// Embed the target itself as the first regressor.
    pub target_lags: bool,
    pub regressors: Vec<Regressor>,
    pub calendar_features: Vec<CalendarFeature>,
    /// Weather forecast columns appended as their `horizon` future values.
    pub nwp_features: Vec<String>,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        Self {
            horizon: 144,
            embed: 144,
            target_lags: true,
            regressors: Vec::new(),
            calendar_features: vec![
                CalendarFeature::StepOfDay,
                CalendarFeature::DayOfWeek,
                CalendarFeature::Holiday,
            ],
            nwp_features: vec!["T".into(), "GHI".into()],
        }
    }
}

impl EmbeddingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.embed == 0 {
            return Err(Error::InvalidArgument("horizon and embedding length must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of samples a gap-free frame of `len` steps yields.
    pub fn sample_count(&self, len: usize) -> usize {
        len.saturating_sub(self.horizon + self.embed)
    }

    /// First usable issue index.
    pub fn first_issue(&self) -> usize {
        self.embed
    }
}

/// Where a feature column's value comes from, relative to the issue time `t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSource {
    /// Measured value of `column` at `t + offset` (`offset ≤ 0`).
    Lag { column: String, offset: isize },
    Calendar(CalendarFeature),
    /// Weather forecast of `column` valid at `t + lead`.
    Nwp { column: String, lead: usize },
}

/// Aligned regressor matrix `x` and target Hankel matrix `y` for one series.
#[derive(Clone, Debug)]
pub struct SamplePair<T> {
    pub x: Matrix<T>,
    /// Row `i` holds `y[t+1] … y[t+h]` for issue index `t = issue_index[i]`.
    pub y: Matrix<T>,
    pub issue_index: Vec<usize>,
    pub issue_times: Vec<NaiveDateTime>,
    pub features: Vec<FeatureSource>,
}

impl<T: Scalar> SamplePair<T> {
    pub fn len(&self) -> usize {
        self.issue_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issue_index.is_empty()
    }

    /// Row index of a given issue index, if sampled.
    pub fn row_of_issue(&self, issue: usize) -> Option<usize> {
        let first = *self.issue_index.first()?;
        let r = issue.checked_sub(first)?;
        (r < self.len() && self.issue_index[r] == issue).then_some(r)
    }
}

/// Builds the regressor and target matrices of `target` under `spec`.
///
/// Lag columns are regressor-major, oldest lag first; calendar features are
/// taken at the issue time; weather forecast columns contribute their values
/// at `t+1 … t+h`.
pub fn hankel_embed<T: Scalar>(
    frame: &TimeSeriesFrame<T>,
    target: &str,
    spec: &EmbeddingSpec,
) -> Result<SamplePair<T>> {
    spec.validate()?;
    let (h, e) = (spec.horizon, spec.embed);
    let len = frame.len();
    if len <= h + e {
        return Err(Error::TooShort { needed: h + e, available: len });
    }
    let y_col = frame.column(target)?;

    let mut lagged: Vec<(&str, &[T], usize)> = Vec::new();
    if spec.target_lags {
        lagged.push((target, y_col, e));
    }
    for r in &spec.regressors {
        lagged.push((r.column.as_str(), frame.column(&r.column)?, if r.embedded { e } else { 1 }));
    }
    let nwp: Vec<(&str, &[T])> = spec
        .nwp_features
        .iter()
        .map(|c| frame.column(c).map(|v| (c.as_str(), v)))
        .collect::<Result<_>>()?;

    let mut features = Vec::new();
    for &(name, _, width) in &lagged {
        for k in 0..width {
            features.push(FeatureSource::Lag {
                column: name.to_string(),
                offset: k as isize - (width as isize - 1),
            });
        }
    }
    features.extend(spec.calendar_features.iter().map(|&c| FeatureSource::Calendar(c)));
    for &(name, _) in &nwp {
        features.extend((1..=h).map(|lead| FeatureSource::Nwp { column: name.to_string(), lead }));
    }

    let n = spec.sample_count(len);
    let p = features.len();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n * h);
    let mut issue_index = Vec::with_capacity(n);
    let mut issue_times = Vec::with_capacity(n);
    for t in e..e + n {
        for &(_, col, width) in &lagged {
            x.extend_from_slice(&col[t + 1 - width..=t]);
        }
        for &c in &spec.calendar_features {
            x.push(frame.calendar_value(c, t));
        }
        for &(_, col) in &nwp {
            x.extend_from_slice(&col[t + 1..=t + h]);
        }
        y.extend_from_slice(&y_col[t + 1..=t + h]);
        issue_index.push(t);
        issue_times.push(frame.timestamp(t));
    }
    Ok(SamplePair {
        x: Matrix::from_vec(n, p, x)?,
        y: Matrix::from_vec(n, h, y)?,
        issue_index,
        issue_times,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn frame(values: Vec<f64>) -> TimeSeriesFrame<f64> {
        let start = NaiveDate::from_ymd_opt(2018, 1, 15).unwrap().and_hms_opt(0, 0, 0).unwrap();
        TimeSeriesFrame::new(start, 10, values.len()).unwrap().with_column("y", values).unwrap()
    }

    fn bare(h: usize, e: usize) -> EmbeddingSpec {
        EmbeddingSpec {
            horizon: h,
            embed: e,
            target_lags: true,
            regressors: vec![],
            calendar_features: vec![],
            nwp_features: vec![],
        }
    }

    #[test]
    fn ten_step_toy() {
        let f = frame((1..=10).map(f64::from).collect());
        let s = hankel_embed(&f, "y", &bare(2, 2)).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.y.row(0), &[4.0, 5.0]);
        assert_eq!(s.x.row(0), &[2.0, 3.0]);
        assert_eq!(s.y.row(5), &[9.0, 10.0]);
        assert_eq!(s.issue_index, vec![2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn constant_series() {
        let f = frame(vec![7.5; 40]);
        let s = hankel_embed(&f, "y", &bare(5, 4)).unwrap();
        assert!(s.x.as_slice().iter().all(|&v| v == 7.5));
        assert!(s.y.as_slice().iter().all(|&v| v == 7.5));
    }

    #[test]
    fn shift_invariance() {
        let f = frame((0..50).map(|i| (i as f64 * 0.3).sin()).collect());
        let a = hankel_embed(&f, "y", &bare(6, 5)).unwrap();
        let b = hankel_embed(&f.shifted(1), "y", &bare(6, 5)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        for (ta, tb) in a.issue_times.iter().zip(&b.issue_times) {
            assert_eq!(*tb - *ta, chrono::Duration::minutes(10));
        }
    }

    #[test]
    fn layout_with_calendar_and_weather() {
        let f = frame((0..30).map(f64::from).collect())
            .with_column("T", (100..130).map(f64::from).collect())
            .unwrap()
            .with_column("x2", (200..230).map(f64::from).collect())
            .unwrap();
        let spec = EmbeddingSpec {
            horizon: 3,
            embed: 2,
            target_lags: true,
            regressors: vec![Regressor { column: "x2".into(), embedded: false }],
            calendar_features: vec![CalendarFeature::StepOfDay],
            nwp_features: vec!["T".into()],
        };
        let s = hankel_embed(&f, "y", &spec).unwrap();
        // t = 2: target lags [1, 2], x2 at t, step of day 2, T at t+1..t+3.
        assert_eq!(s.x.row(0), &[1.0, 2.0, 202.0, 2.0, 103.0, 104.0, 105.0]);
        assert_eq!(s.features.len(), 7);
    }

    #[test]
    fn errors() {
        let f = frame(vec![1.0; 4]);
        assert!(matches!(hankel_embed(&f, "y", &bare(2, 2)), Err(Error::TooShort { .. })));
        let f = frame(vec![1.0; 20]);
        assert!(matches!(hankel_embed(&f, "nope", &bare(2, 2)), Err(Error::UnknownColumn(_))));
    }
}
