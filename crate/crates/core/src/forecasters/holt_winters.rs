//! Additive Holt–Winters smoothing with a daily and a weekly seasonal
//! component, no trend, and one parameter set per step ahead.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Which weight damps the previous weekly seasonal state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeeklyDecay {
    /// `(1 − γ₂)·s₂[t−p₂]`.
    #[default]
    Gamma2,
    /// `(1 − γ₁)·s₂[t−p₂]`, the form sometimes printed for this model.
    Gamma1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Smoothing {
    pub fn new(alpha: f64, gamma1: f64, gamma2: f64) -> Self {
        Self { alpha, gamma1, gamma2 }
    }

    fn key(&self) -> (u64, u64, u64) {
        (self.alpha.to_bits(), self.gamma1.to_bits(), self.gamma2.to_bits())
    }
}

/// Level and the two seasonal state buffers. Seasonal entries are stored at
/// `absolute time mod period`, so after processing time `t` the buffers hold
/// the states of `t−p+1 … t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwState<T> {
    pub level: T,
    pub s1: Vec<T>,
    pub s2: Vec<T>,
}

impl<T: Scalar> HwState<T> {
    pub fn zeros(p1: usize, p2: usize, level: T) -> Self {
        Self { level, s1: vec![T::zero(); p1], s2: vec![T::zero(); p2] }
    }

    /// Initial state from the first `p2` values of `y`, whose first element
    /// sits at absolute time `start`. The level is the mean of that window,
    /// `s1` the average within-cycle profile after removing each daily mean,
    /// and `s2` the remaining weekly profile.
    pub fn initialize(y: &[T], start: usize, p1: usize, p2: usize) -> Result<Self> {
        if p1 == 0 || p2 < p1 {
            return Err(Error::InvalidArgument(format!("invalid seasonal periods ({p1}, {p2})")));
        }
        if y.len() < p2 {
            return Err(Error::TooShort { needed: p2, available: y.len() });
        }
        let window = &y[..p2];
        let cycles = p2 / p1;
        let cycle_means: Vec<T> = (0..cycles)
            .map(|k| window[k * p1..(k + 1) * p1].iter().copied().sum::<T>() / T::from_usize_lossy(p1))
            .collect();
        let level = window.iter().copied().sum::<T>() / T::from_usize_lossy(p2);
        let mut profile = vec![T::zero(); p1];
        for k in 0..cycles {
            for i in 0..p1 {
                profile[i] += window[k * p1 + i] - cycle_means[k];
            }
        }
        for v in &mut profile {
            *v /= T::from_usize_lossy(cycles);
        }
        let mut state = Self::zeros(p1, p2, level);
        for i in 0..p1 {
            state.s1[(start + i) % p1] = profile[i];
        }
        for i in 0..p2 {
            state.s2[(start + i) % p2] = window[i] - level - profile[i % p1];
        }
        Ok(state)
    }

    /// Processes the observation `y` at absolute time `t`.
    #[inline]
    pub fn update(&mut self, t: usize, y: T, s: &Smoothing, decay: WeeklyDecay) {
        let (p1, p2) = (self.s1.len(), self.s2.len());
        let (i1, i2) = (t % p1, t % p2);
        let (old1, old2) = (self.s1[i1], self.s2[i2]);
        let (a, g1, g2) = (T::lit(s.alpha), T::lit(s.gamma1), T::lit(s.gamma2));
        let one = T::one();
        self.level = a * (y - old1 - old2) + (one - a) * self.level;
        self.s1[i1] = g1 * (y - self.level - old2) + (one - g1) * old1;
        let keep = match decay {
            WeeklyDecay::Gamma2 => one - g2,
            WeeklyDecay::Gamma1 => one - g1,
        };
        self.s2[i2] = g2 * (y - self.level - old1) + keep * old2;
    }

    /// Forecast `j` steps after the last processed time `t`.
    #[inline]
    pub fn forecast(&self, t: usize, j: usize) -> T {
        self.level + self.s1[(t + j) % self.s1.len()] + self.s2[(t + j) % self.s2.len()]
    }
}

/// Search settings for the per-step-ahead parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HwConfig {
    /// Daily period in steps; `None` uses the frame's steps per day.
    pub daily_period: Option<usize>,
    /// Weekly period in steps; `None` uses seven days.
    pub weekly_period: Option<usize>,
    pub weekly_decay: WeeklyDecay,
    pub coarse_grid: Vec<f64>,
    /// Half-width of the refinement grid around the coarse optimum.
    pub refine_step: f64,
    /// Random issue times drawn per training block to score parameters.
    pub samples_per_block: usize,
    /// Remove a linear dependence on the GHI and temperature forecasts
    /// before smoothing.
    pub detrend: bool,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            daily_period: None,
            weekly_period: None,
            weekly_decay: WeeklyDecay::Gamma2,
            coarse_grid: vec![0.01, 0.25, 0.5, 0.75, 0.99],
            refine_step: 0.125,
            samples_per_block: 48,
            detrend: true,
        }
    }
}

/// Fitted parameters: one smoothing set per step ahead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwParams {
    pub p1: usize,
    pub p2: usize,
    pub weekly_decay: WeeklyDecay,
    pub per_step: Vec<Smoothing>,
}

/// Runs one smoothing set over `y[..=last issue]` (absolute time = index),
/// starting from the state initialised on the first weekly cycle, and
/// visits the state after each issue time in `issues` (ascending).
fn run_series<T: Scalar>(
    y: &[T],
    s: &Smoothing,
    p1: usize,
    p2: usize,
    decay: WeeklyDecay,
    issues: &[usize],
    mut visit: impl FnMut(usize, &HwState<T>),
) -> Result<()> {
    let Some(&last) = issues.last() else { return Ok(()) };
    if last >= y.len() {
        return Err(Error::Dimension(format!("issue time {last} beyond series of {}", y.len())));
    }
    let mut state = HwState::initialize(y, 0, p1, p2)?;
    let mut k = 0;
    for (t, &v) in y[..=last].iter().enumerate() {
        state.update(t, v, s, decay);
        while k < issues.len() && issues[k] == t {
            visit(k, &state);
            k += 1;
        }
    }
    Ok(())
}

/// Mean squared `j`-step error (index `j−1`) of one smoothing set at the
/// sampled issue times.
fn score<T: Scalar>(
    y: &[T],
    issues: &[usize],
    s: &Smoothing,
    horizon: usize,
    p1: usize,
    p2: usize,
    decay: WeeklyDecay,
) -> Result<Vec<f64>> {
    let mut sse = vec![0.0; horizon];
    let mut cnt = vec![0usize; horizon];
    run_series(y, s, p1, p2, decay, issues, |k, st| {
        let t = issues[k];
        for j in 1..=horizon.min(y.len() - 1 - t) {
            let e = (st.forecast(t, j) - y[t + j]).as_f64();
            sse[j - 1] += e * e;
            cnt[j - 1] += 1;
        }
    })?;
    Ok(sse.iter().zip(&cnt).map(|(&s, &c)| if c == 0 { f64::INFINITY } else { s / c as f64 }).collect())
}

/// Fits one smoothing set per step ahead by minimising the squared
/// `j`-step error at random issue times drawn inside the training
/// `blocks` (index ranges of `y`): a coarse grid over (α, γ₁, γ₂)
/// followed by one local refinement per optimum.
///
/// The recursion always runs over the whole of `y` from its start, but
/// only issue times whose `horizon` targets lie inside one block are
/// scored, and none inside the initial weekly cycle.
pub fn fit_holt_winters<T: Scalar, R: Rng>(
    y: &[T],
    blocks: &[Range<usize>],
    horizon: usize,
    p1: usize,
    p2: usize,
    cfg: &HwConfig,
    rng: &mut R,
) -> Result<HwParams> {
    if y.len() < p2 {
        return Err(Error::TooShort { needed: p2, available: y.len() });
    }
    let mut samples: Vec<usize> = Vec::new();
    for b in blocks {
        let lo = b.start.max(p2);
        let Some(hi) = b.end.min(y.len()).checked_sub(horizon) else { continue };
        if lo < hi {
            samples.extend((0..cfg.samples_per_block).map(|_| rng.gen_range(lo..hi)));
        }
    }
    samples.sort_unstable();
    samples.dedup();
    if samples.is_empty() {
        return Err(Error::Data(format!(
            "no training block reaches {} steps past the {p2}-step warm-up",
            horizon + 1
        )));
    }
    let decay = cfg.weekly_decay;
    let grid = &cfg.coarse_grid;
    let mut best: Vec<(f64, Smoothing)> = vec![(f64::INFINITY, Smoothing::new(0.5, 0.5, 0.5)); horizon];
    let consider = |s: Smoothing, best: &mut Vec<(f64, Smoothing)>, only: Option<&[usize]>| -> Result<()> {
        let mse = score(y, &samples, &s, horizon, p1, p2, decay)?;
        let mut check = |j: usize| {
            if mse[j] < best[j].0 {
                best[j] = (mse[j], s);
            }
        };
        match only {
            Some(js) => js.iter().for_each(|&j| check(j)),
            None => (0..horizon).for_each(check),
        }
        Ok(())
    };
    for &a in grid {
        for &g1 in grid {
            for &g2 in grid {
                consider(Smoothing::new(a, g1, g2), &mut best, None)?;
            }
        }
    }
    let mut centers: BTreeMap<(u64, u64, u64), (Smoothing, Vec<usize>)> = BTreeMap::new();
    for (j, (_, s)) in best.iter().enumerate() {
        centers.entry(s.key()).or_insert_with(|| (*s, Vec::new())).1.push(j);
    }
    let d = cfg.refine_step;
    let clamp = |v: f64| v.clamp(0.01, 0.99);
    for (center, js) in centers.into_values() {
        for da in [-d, 0.0, d] {
            for d1 in [-d, 0.0, d] {
                for d2 in [-d, 0.0, d] {
                    if da == 0.0 && d1 == 0.0 && d2 == 0.0 {
                        continue;
                    }
                    let s = Smoothing::new(clamp(center.alpha + da), clamp(center.gamma1 + d1), clamp(center.gamma2 + d2));
                    consider(s, &mut best, Some(&js))?;
                }
            }
        }
    }
    Ok(HwParams { p1, p2, weekly_decay: decay, per_step: best.into_iter().map(|(_, s)| s).collect() })
}

impl HwParams {
    /// Forecasts all steps ahead after each issue time in `issues`
    /// (ascending), advancing the recursion over `y` from its start.
    /// Returns `issues × horizon`.
    pub fn forecast_at<T: Scalar>(&self, y: &[T], issues: &[usize]) -> Result<Matrix<T>> {
        let h = self.per_step.len();
        let mut out = Matrix::zeros(issues.len(), h);
        let mut groups: BTreeMap<(u64, u64, u64), (Smoothing, Vec<usize>)> = BTreeMap::new();
        for (j, s) in self.per_step.iter().enumerate() {
            groups.entry(s.key()).or_insert_with(|| (*s, Vec::new())).1.push(j);
        }
        for (s, js) in groups.into_values() {
            run_series(y, &s, self.p1, self.p2, self.weekly_decay, issues, |k, st| {
                for &j in &js {
                    out.row_mut(k)[j] = st.forecast(issues[k], j + 1);
                }
            })?;
        }
        Ok(out)
    }

    /// Forecast after the last value of `history`, which must hold at least
    /// one weekly cycle; the state is initialised on that first cycle.
    pub fn hw_forecast<T: Scalar>(&self, history: &[T]) -> Result<Vec<T>> {
        if history.is_empty() {
            return Err(Error::TooShort { needed: self.p2, available: 0 });
        }
        let m = self.forecast_at(history, &[history.len() - 1])?;
        Ok(m.row(0).to_vec())
    }
}
