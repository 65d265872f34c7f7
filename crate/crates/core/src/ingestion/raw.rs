//! Raw meter tables: CSV loading, meter selection, sign corrections and
//! assembly of the cleaned frame.

use std::collections::BTreeSet;
use std::io::Read;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pchip::fill_gaps_pchip;
use crate::error::{Error, Result};
use crate::hierarchy::TimeSeriesFrame;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct MeterSeries<T> {
    pub id: String,
    pub installed: Option<NaiveDate>,
    /// One value per grid step; `None` marks a missing sample.
    pub values: Vec<Option<T>>,
}

/// Per-meter power readings on a regular grid that may contain gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMeterTable<T> {
    pub start: NaiveDateTime,
    pub step_minutes: u32,
    pub len: usize,
    pub meters: Vec<MeterSeries<T>>,
}

pub(crate) fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = chrono::DateTime::parse_from_rfc3339(s) {
        return Ok(t.naive_utc());
    }
    let trimmed = s.trim_end_matches('Z');
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(trimmed, fmt) {
            return Ok(t);
        }
    }
    Err(Error::Data(format!("cannot parse timestamp `{s}`")))
}

pub(crate) fn parse_cell<T: Scalar>(s: &str) -> Result<Option<T>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| Error::Data(format!("cannot parse value `{s}`")))?;
    Ok(v.is_finite().then(|| T::lit(v)))
}

fn step_index(start: NaiveDateTime, t: NaiveDateTime, step_minutes: u32) -> Result<usize> {
    let mins = (t - start).num_minutes();
    let step = step_minutes as i64;
    if (t - start) != Duration::minutes(mins) || mins < 0 || mins % step != 0 {
        return Err(Error::Data(format!("timestamp {t} is off the {step_minutes}-minute grid")));
    }
    Ok((mins / step) as usize)
}

impl<T: Scalar> RawMeterTable<T> {
    /// Reads a wide CSV: UTC timestamps in column 1, one column per meter.
    /// Rows are placed on a `step_minutes` grid starting at the first
    /// timestamp; absent rows and empty cells become gaps.
    pub fn from_csv<R: Read>(reader: R, step_minutes: u32) -> Result<Self> {
        if step_minutes == 0 {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let ids: Vec<String> = rdr.headers()?.iter().skip(1).map(|s| s.trim().to_string()).collect();
        if ids.is_empty() {
            return Err(Error::Data("meter table has no meter columns".into()));
        }
        let mut rows: Vec<(NaiveDateTime, Vec<Option<T>>)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let t = parse_timestamp(rec.get(0).unwrap_or(""))?;
            if let Some((prev, _)) = rows.last() {
                if t == *prev {
                    return Err(Error::Data(format!("duplicate timestamp {t}")));
                }
                if t < *prev {
                    return Err(Error::Data(format!("timestamps not sorted at {t}")));
                }
            }
            let vals = (0..ids.len()).map(|j| parse_cell(rec.get(j + 1).unwrap_or(""))).collect::<Result<_>>()?;
            rows.push((t, vals));
        }
        let Some(&(start, _)) = rows.first() else {
            return Err(Error::Data("meter table has no rows".into()));
        };
        let len = step_index(start, rows.last().map(|r| r.0).unwrap_or(start), step_minutes)? + 1;
        let mut meters: Vec<MeterSeries<T>> = ids
            .into_iter()
            .map(|id| MeterSeries { id, installed: None, values: vec![None; len] })
            .collect();
        for (t, vals) in rows {
            let i = step_index(start, t, step_minutes)?;
            for (m, v) in meters.iter_mut().zip(vals) {
                m.values[i] = v;
            }
        }
        Ok(Self { start, step_minutes, len, meters })
    }

    pub fn steps_per_day(&self) -> usize {
        (1440 / self.step_minutes) as usize
    }

    pub fn meter(&self, id: &str) -> Result<&MeterSeries<T>> {
        self.meters.iter().find(|m| m.id == id).ok_or_else(|| Error::UnknownMeter(id.to_string()))
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::minutes(i as i64 * self.step_minutes as i64)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionDirection {
    /// Negate the given instant and everything after it.
    #[default]
    From,
    /// Negate everything strictly before the given instant.
    UpTo,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignCorrection {
    pub meter: String,
    pub instant: NaiveDateTime,
    #[serde(default)]
    pub direction: CorrectionDirection,
}

/// Negates `values` from (or up to) index `at`; indices beyond the end are clamped.
pub fn negate_segment<T: Scalar>(values: &mut [Option<T>], at: usize, direction: CorrectionDirection) {
    let at = at.min(values.len());
    let seg = match direction {
        CorrectionDirection::From => &mut values[at..],
        CorrectionDirection::UpTo => &mut values[..at],
    };
    for v in seg.iter_mut().flatten() {
        *v = -*v;
    }
}

/// Applies manual sign corrections; returns the number applied per meter
/// in table order.
pub fn apply_sign_corrections<T: Scalar>(
    table: &mut RawMeterTable<T>,
    corrections: &[SignCorrection],
) -> Result<Vec<usize>> {
    let mut applied = vec![0; table.meters.len()];
    for c in corrections {
        let m = table
            .meters
            .iter()
            .position(|m| m.id == c.meter)
            .ok_or_else(|| Error::UnknownMeter(c.meter.clone()))?;
        let step = table.step_minutes as i64;
        let mins = (c.instant - table.start).num_minutes();
        // Round up so an off-grid instant negates the first sample at or after it.
        let at = if mins <= 0 { 0 } else { ((mins + step - 1) / step) as usize };
        negate_segment(&mut table.meters[m].values, at, c.direction);
        applied[m] += 1;
    }
    Ok(applied)
}

/// Day boundaries where the daily mean changes sign and keeps the new sign
/// for at least `min_days` days with a comparable magnitude. Candidates
/// are reported, never applied.
pub fn detect_sign_flips<T: Scalar>(values: &[Option<T>], steps_per_day: usize, min_days: usize) -> Vec<usize> {
    let means: Vec<Option<f64>> = values
        .chunks(steps_per_day)
        .map(|day| {
            let obs: Vec<f64> = day.iter().flatten().map(|v| v.as_f64()).collect();
            (obs.len() * 2 >= day.len()).then(|| obs.iter().sum::<f64>() / obs.len() as f64)
        })
        .collect();
    let sign = |m: f64| if m > 0.0 { 1 } else if m < 0.0 { -1 } else { 0 };
    let mut out = Vec::new();
    for d in 1..means.len() {
        let (Some(prev), Some(cur)) = (means[d - 1], means[d]) else { continue };
        if sign(prev) == 0 || sign(prev) == sign(cur) {
            continue;
        }
        let ratio = cur.abs() / prev.abs();
        if !(0.5..=2.0).contains(&ratio) {
            continue;
        }
        let sustained = means[d..].iter().take(min_days).flatten().all(|&m| sign(m) == sign(cur));
        let before = means[..d].iter().rev().take(min_days).flatten().all(|&m| sign(m) == sign(prev));
        if sustained && before && means.len() - d >= min_days {
            out.push(d * steps_per_day);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeterReport {
    pub id: String,
    pub retained: bool,
    pub reason: Option<String>,
    pub gap_count: usize,
    pub max_gap: usize,
    pub interpolated: usize,
    pub sign_corrections: usize,
    /// Step indices flagged by the sign-flip detector.
    pub flip_candidates: Vec<usize>,
}

/// Outcome of cleaning; every input meter appears exactly once.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub meters: Vec<MeterReport>,
    /// Grid range kept in the cleaned frame, in raw-table steps.
    pub kept_start: usize,
    pub kept_len: usize,
}

impl CleaningReport {
    pub fn retained(&self) -> Vec<&str> {
        self.meters.iter().filter(|m| m.retained).map(|m| m.id.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Gap statistics inside the observed range: (count, longest run).
fn gap_stats<T>(values: &[Option<T>]) -> (usize, usize) {
    let (Some(a), Some(b)) = (values.iter().position(Option::is_some), values.iter().rposition(Option::is_some))
    else {
        return (0, values.len());
    };
    let (mut count, mut max, mut run) = (0, 0, 0);
    for v in &values[a..=b] {
        if v.is_none() {
            run += 1;
        } else {
            if run > 0 {
                count += 1;
                max = max.max(run);
            }
            run = 0;
        }
    }
    (count, max)
}

/// Keeps meters covering at least `min_span_steps` with no interior gap
/// longer than `max_gap` steps.
pub fn select_meters<T: Scalar>(
    raw: RawMeterTable<T>,
    min_span_steps: usize,
    max_gap: usize,
) -> Result<(RawMeterTable<T>, CleaningReport)> {
    let mut report = CleaningReport::default();
    let mut kept = Vec::new();
    for m in raw.meters {
        let (gap_count, longest) = gap_stats(&m.values);
        let first = m.values.iter().position(Option::is_some);
        let last = m.values.iter().rposition(Option::is_some);
        let span = match (first, last) {
            (Some(a), Some(b)) => b - a + 1,
            _ => 0,
        };
        let reason = if span == 0 {
            Some("no observations".to_string())
        } else if span < min_span_steps {
            Some(format!("span of {span} steps is below {min_span_steps}"))
        } else if longest > max_gap {
            Some(format!("gap of {longest} steps exceeds {max_gap}"))
        } else {
            None
        };
        report.meters.push(MeterReport {
            id: m.id.clone(),
            retained: reason.is_none(),
            reason: reason.clone(),
            gap_count,
            max_gap: longest,
            interpolated: 0,
            sign_corrections: 0,
            flip_candidates: Vec::new(),
        });
        if reason.is_none() {
            kept.push(m);
        }
    }
    if kept.is_empty() {
        return Err(Error::NoMetersRetained);
    }
    report.kept_len = raw.len;
    Ok((RawMeterTable { meters: kept, ..raw }, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningOptions {
    pub min_span_days: usize,
    pub max_gap_steps: usize,
    pub utc_offset_minutes: i32,
    pub holidays: Vec<NaiveDate>,
    pub sign_corrections: Vec<SignCorrection>,
    /// Days a flipped sign must persist before the detector reports it.
    pub detector_min_days: usize,
}

impl Default for CleaningOptions {
    fn default() -> Self {
        Self {
            min_span_days: 365,
            max_gap_steps: 6,
            utc_offset_minutes: 60,
            holidays: Vec::new(),
            sign_corrections: Vec::new(),
            detector_min_days: 7,
        }
    }
}

/// Full cleaning pass: sign corrections, meter selection, PCHIP gap filling
/// and trimming to the whole local days covered by every retained meter.
pub fn clean_meters<T: Scalar>(
    mut raw: RawMeterTable<T>,
    opts: &CleaningOptions,
) -> Result<(TimeSeriesFrame<T>, CleaningReport)> {
    let spd = raw.steps_per_day();
    let applied = apply_sign_corrections(&mut raw, &opts.sign_corrections)?;
    let applied: Vec<(String, usize)> = raw.meters.iter().map(|m| m.id.clone()).zip(applied).collect();
    let candidates: Vec<Vec<usize>> =
        raw.meters.par_iter().map(|m| detect_sign_flips(&m.values, spd, opts.detector_min_days)).collect();
    let candidates: Vec<(String, Vec<usize>)> = raw.meters.iter().map(|m| m.id.clone()).zip(candidates).collect();

    let (table, mut report) = select_meters(raw, opts.min_span_days * spd, opts.max_gap_steps)?;
    for r in &mut report.meters {
        r.sign_corrections = applied.iter().find(|a| a.0 == r.id).map_or(0, |a| a.1);
        r.flip_candidates = candidates.iter().find(|c| c.0 == r.id).map(|c| c.1.clone()).unwrap_or_default();
    }

    let filled = table.meters.par_iter().map(|m| fill_gaps_pchip(&m.values)).collect::<Result<Vec<_>>>()?;
    let lo = filled.iter().map(|f| f.offset).max().unwrap_or(0);
    let hi = filled.iter().map(|f| f.offset + f.values.len()).min().unwrap_or(0);

    // Align to local midnight so step-of-day and day boundaries agree.
    let offset = Duration::minutes(opts.utc_offset_minutes as i64);
    let local = table.timestamp(lo) + offset;
    let since_midnight = (local.hour() * 60 + local.minute()) as usize;
    let skip = if since_midnight == 0 { 0 } else { (1440 - since_midnight) / table.step_minutes as usize };
    let start = lo + skip;
    let days = hi.saturating_sub(start) / spd;
    if days == 0 {
        return Err(Error::TooShort { needed: spd, available: hi.saturating_sub(start) });
    }
    let len = days * spd;

    let mut frame = TimeSeriesFrame::new(table.timestamp(start), table.step_minutes, len)?
        .with_utc_offset(opts.utc_offset_minutes)
        .with_holidays(opts.holidays.iter().copied().collect::<BTreeSet<_>>());
    for (m, f) in table.meters.iter().zip(&filled) {
        let from = start - f.offset;
        let vals = f.values[from..from + len].to_vec();
        let interpolated = m.values[start..start + len].iter().filter(|v| v.is_none()).count();
        if let Some(r) = report.meters.iter_mut().find(|r| r.id == m.id) {
            r.interpolated = interpolated;
        }
        frame.push_column(m.id.clone(), vals)?;
    }
    report.kept_start = start;
    report.kept_len = len;
    Ok((frame, report))
}
