//! Seeded synthetic hierarchy: bottom-level loads with daily and weekly
//! seasonality, weather sensitivity and autocorrelated noise, plus matching
//! 12-hourly weather forecasts.

use std::f64::consts::PI;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::nwp::NwpTable;
use crate::error::{Error, Result};
use crate::hierarchy::TimeSeriesFrame;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_bottom: usize,
    pub days: usize,
    pub seed: u64,
    /// Scales load noise and weather variability; 0 gives a series that
    /// repeats exactly every week.
    pub noise_amplitude: f64,
    /// Average load per meter in kW.
    pub mean_kw: f64,
    pub step_minutes: u32,
    /// First day, taken as local midnight (UTC offset 0).
    pub start: NaiveDate,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_bottom: 24,
            days: 60,
            seed: 0,
            noise_amplitude: 1.0,
            mean_kw: 81.0,
            step_minutes: 10,
            start: NaiveDate::from_ymd_opt(2018, 1, 15).expect("valid date"),
        }
    }
}

const CLIMATE_T: f64 = 6.0;

struct MeterParams {
    base: f64,
    morning: f64,
    evening: f64,
    midday: f64,
    weekend: f64,
    heat: f64,
    pv: f64,
    noise_sd: f64,
    common_gain: f64,
}

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    let mut d = (hour - center).abs();
    d = d.min(24.0 - d);
    (-0.5 * (d / width).powi(2)).exp()
}

fn clear_sky(hour: f64) -> f64 {
    let s = (PI * (hour - 7.0) / 10.0).sin();
    if (7.0..17.0).contains(&hour) {
        850.0 * s.max(0.0).powf(1.2)
    } else {
        0.0
    }
}

/// Stationary AR(1) path with marginal standard deviation `sd`.
fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64, sd: f64) -> Vec<f64> {
    if sd == 0.0 {
        return vec![0.0; n];
    }
    let innov = Normal::new(0.0, sd * (1.0 - phi * phi).sqrt()).expect("finite sd");
    let mut x = Normal::new(0.0, sd).expect("finite sd").sample(rng);
    (0..n)
        .map(|_| {
            x = phi * x + innov.sample(rng);
            x
        })
        .collect()
}

/// Generates `spec.n_bottom` meter columns (`m00`, `m01`, …) and hourly
/// weather forecasts for `T` and `GHI` issued every 12 hours.
pub fn generate_synthetic_with<T: Scalar>(spec: &SyntheticSpec) -> Result<(TimeSeriesFrame<T>, NwpTable<T>)> {
    if spec.n_bottom == 0 || spec.days == 0 {
        return Err(Error::InvalidArgument("synthetic data needs at least one meter and one day".into()));
    }
    if spec.step_minutes == 0 || 60 % spec.step_minutes != 0 {
        return Err(Error::InvalidArgument("synthetic step must divide one hour".into()));
    }
    let amp = spec.noise_amplitude.max(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let spd = (1440 / spec.step_minutes) as usize;
    let len = spec.days * spd;
    // Weather is simulated two days beyond either end so that every
    // forecast issuance has a truth to perturb.
    let pad = 2 * spd;
    let total = len + 2 * pad;
    let hour_of = |i: usize| (i % spd) as f64 * 24.0 / spd as f64;

    let anomaly = ar1(&mut rng, total, (-1.0 / (2.0 * spd as f64)).exp(), 4.0 * amp);
    let temp: Vec<f64> = (0..total)
        .map(|i| CLIMATE_T + 4.0 * (2.0 * PI * (hour_of(i) - 15.0) / 24.0).cos() + anomaly[i])
        .collect();
    let n_days_total = total / spd;
    let cloud: Vec<f64> = (0..n_days_total).map(|_| (1.0 - amp * 0.7 * rng.gen::<f64>()).clamp(0.1, 1.0)).collect();
    let ghi: Vec<f64> = (0..total).map(|i| clear_sky(hour_of(i)) * cloud[i / spd]).collect();
    let ghi_mean = (0..spd).map(|i| clear_sky(hour_of(i))).sum::<f64>() / spd as f64 * (1.0 - amp * 0.35);

    let mut params: Vec<MeterParams> = (0..spec.n_bottom)
        .map(|_| MeterParams {
            base: rng.gen_range(0.65..1.35),
            morning: rng.gen_range(0.05..0.3),
            evening: rng.gen_range(0.1..0.4),
            midday: rng.gen_range(0.0..0.35),
            weekend: rng.gen_range(-0.25..0.1),
            heat: rng.gen_range(0.008..0.025),
            pv: if rng.gen_bool(0.3) { rng.gen_range(0.1..0.3) } else { 0.0 },
            noise_sd: rng.gen_range(0.04..0.08),
            common_gain: rng.gen_range(0.5..1.5),
        })
        .collect();
    let mean_base = params.iter().map(|p| p.base).sum::<f64>() / spec.n_bottom as f64;
    for p in &mut params {
        p.base *= spec.mean_kw / mean_base;
    }

    let common = ar1(&mut rng, len, 0.98, 0.03 * amp);
    let start = spec.start.and_hms_opt(0, 0, 0).expect("midnight");
    let mut frame = TimeSeriesFrame::new(start, spec.step_minutes, len)?;
    for (m, p) in params.iter().enumerate() {
        let daily_raw: Vec<f64> = (0..spd)
            .map(|i| {
                let h = hour_of(i);
                p.morning * bump(h, 7.5, 1.2) + p.evening * bump(h, 19.5, 2.0) + p.midday * bump(h, 13.0, 3.0)
            })
            .collect();
        let daily_mean = daily_raw.iter().sum::<f64>() / spd as f64;
        let noise = ar1(&mut rng, len, 0.95, p.noise_sd * amp);
        let values: Vec<T> = (0..len)
            .map(|i| {
                let w = pad + i;
                let h = hour_of(i);
                let dow = (i / spd) % 7;
                let off_day = if dow >= 5 { 5.0 / 7.0 } else { -2.0 / 7.0 };
                let shape = 1.0
                    + (daily_raw[i % spd] - daily_mean)
                    + p.weekend * off_day * (0.4 + 0.6 * bump(h, 13.0, 4.0))
                    + p.heat * (CLIMATE_T - temp[w])
                    - p.pv * (ghi[w] - ghi_mean) / 1000.0
                    + noise[i]
                    + p.common_gain * common[i];
                T::lit(p.base * shape)
            })
            .collect();
        frame.push_column(format!("m{m:02}"), values)?;
    }

    let mut nwp = NwpTable::new(vec!["T".into(), "GHI".into()]);
    let err = Normal::new(0.0, 1.0).expect("unit normal");
    let origin: NaiveDateTime = start - Duration::days(2);
    let steps_per_hour = (60 / spec.step_minutes) as usize;
    let mut issue_step = 0;
    while issue_step + 48 * steps_per_hour < total {
        let issue = origin + Duration::minutes((issue_step * spec.step_minutes as usize) as i64);
        let mut t_err = 0.0;
        for lead in 0..=48 {
            let s = issue_step + lead * steps_per_hour;
            t_err += amp * err.sample(&mut rng) * 0.25;
            let g_err = 1.0 + amp * 0.1 * err.sample(&mut rng);
            let valid = origin + Duration::minutes((s * spec.step_minutes as usize) as i64);
            nwp.push(issue, valid, vec![T::lit(temp[s] + t_err), T::lit((ghi[s] * g_err).max(0.0))])?;
        }
        issue_step += 12 * steps_per_hour;
    }
    Ok((frame, nwp))
}

/// [`generate_synthetic_with`] using default settings for everything but
/// the size and seed.
pub fn generate_synthetic<T: Scalar>(
    n_bottom: usize,
    days: usize,
    seed: u64,
) -> Result<(TimeSeriesFrame<T>, NwpTable<T>)> {
    generate_synthetic_with(&SyntheticSpec { n_bottom, days, seed, ..SyntheticSpec::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::align_nwp;

    #[test]
    fn deterministic_given_seed() {
        let (a, na) = generate_synthetic::<f64>(3, 10, 7).unwrap();
        let (b, nb) = generate_synthetic::<f64>(3, 10, 7).unwrap();
        assert_eq!(a.column("m01").unwrap(), b.column("m01").unwrap());
        assert_eq!(na, nb);
        let (c, _) = generate_synthetic::<f64>(3, 10, 8).unwrap();
        assert_ne!(a.column("m01").unwrap(), c.column("m01").unwrap());
    }

    #[test]
    fn zero_noise_is_weekly_periodic() {
        let spec = SyntheticSpec { n_bottom: 4, days: 21, noise_amplitude: 0.0, ..SyntheticSpec::default() };
        let (f, nwp) = generate_synthetic_with::<f64>(&spec).unwrap();
        for name in f.names() {
            let c = f.column(name).unwrap();
            for i in 0..c.len() - 1008 {
                assert!((c[i] - c[i + 1008]).abs() < 1e-9);
            }
        }
        let aligned = align_nwp(&nwp, f.start(), f.len(), 10, Duration::hours(24)).unwrap();
        let t = aligned.column("T").unwrap();
        assert!((t[0] - t[144]).abs() < 1e-9);
    }

    #[test]
    fn mean_near_target_scale() {
        let (f, _) = generate_synthetic::<f64>(24, 28, 1).unwrap();
        let mut sum = 0.0;
        let mut n = 0.0;
        for name in f.names() {
            for v in f.column(name).unwrap() {
                sum += v;
                n += 1.0;
            }
        }
        let mean = sum / n;
        assert!((mean - 81.0).abs() < 8.1, "mean {mean}");
    }

    #[test]
    fn forecasts_cover_the_frame_with_a_day_of_lead() {
        let (f, nwp) = generate_synthetic::<f64>(2, 12, 3).unwrap();
        let aligned = align_nwp(&nwp, f.start(), f.len(), 10, Duration::hours(24)).unwrap();
        assert_eq!(aligned.records.len(), f.len());
        assert!(aligned.records.iter().all(|r| r.issue <= r.valid - Duration::hours(24)));
    }
}
