use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::summation::Hierarchy;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Calendar features derived from timestamps, encoded as integer codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalendarFeature {
    /// Position of the instant within the local day, `0..steps_per_day`.
    StepOfDay,
    /// Monday = 0 … Sunday = 6.
    DayOfWeek,
    /// 1 on configured holidays, else 0.
    Holiday,
}

/// Uniformly sampled multivariate series on a shared time axis.
///
/// Timestamps are UTC; calendar features are evaluated in local civil time
/// obtained with a fixed UTC offset.
#[derive(Clone, Debug)]
pub struct TimeSeriesFrame<T> {
    start: NaiveDateTime,
    step_minutes: u32,
    len: usize,
    names: Vec<String>,
    columns: Vec<Vec<T>>,
    utc_offset_minutes: i32,
    holidays: BTreeSet<NaiveDate>,
}

impl<T: Scalar> TimeSeriesFrame<T> {
    pub fn new(start: NaiveDateTime, step_minutes: u32, len: usize) -> Result<Self> {
        if step_minutes == 0 || 1440 % step_minutes != 0 {
            return Err(Error::InvalidArgument(format!(
                "step of {step_minutes} minutes does not divide a day"
            )));
        }
        Ok(Self {
            start,
            step_minutes,
            len,
            names: Vec::new(),
            columns: Vec::new(),
            utc_offset_minutes: 0,
            holidays: BTreeSet::new(),
        })
    }

    pub fn with_utc_offset(mut self, minutes: i32) -> Self {
        self.utc_offset_minutes = minutes;
        self
    }

    pub fn with_holidays(mut self, holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        self.holidays = holidays.into_iter().collect();
        self
    }

    /// Adds a column; rejects wrong length, duplicate names and non-finite values.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<T>) -> Result<()> {
        let name = name.into();
        if values.len() != self.len {
            return Err(Error::Dimension(format!(
                "column `{name}` has {} values, frame has {}",
                values.len(),
                self.len
            )));
        }
        if self.names.contains(&name) {
            return Err(Error::Data(format!("duplicate column `{name}`")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("column `{name}` has a non-finite value at step {i}")));
        }
        self.names.push(name);
        self.columns.push(values);
        Ok(())
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<T>) -> Result<Self> {
        self.push_column(name, values)?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn steps_per_day(&self) -> usize {
        (1440 / self.step_minutes) as usize
    }

    pub fn utc_offset_minutes(&self) -> i32 {
        self.utc_offset_minutes
    }

    pub fn holidays(&self) -> &BTreeSet<NaiveDate> {
        &self.holidays
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&[T]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::minutes(i as i64 * self.step_minutes as i64)
    }

    pub fn local_time(&self, i: usize) -> NaiveDateTime {
        self.timestamp(i) + Duration::minutes(self.utc_offset_minutes as i64)
    }

    pub fn step_of_day(&self, i: usize) -> usize {
        let t = self.local_time(i);
        (t.hour() * 60 + t.minute()) as usize / self.step_minutes as usize
    }

    pub fn day_of_week(&self, i: usize) -> usize {
        self.local_time(i).weekday().num_days_from_monday() as usize
    }

    pub fn is_holiday(&self, i: usize) -> bool {
        self.holidays.contains(&self.local_time(i).date())
    }

    /// Weekend or configured holiday.
    pub fn is_non_working_day(&self, i: usize) -> bool {
        self.day_of_week(i) >= 5 || self.is_holiday(i)
    }

    pub fn calendar_value(&self, feature: CalendarFeature, i: usize) -> T {
        match feature {
            CalendarFeature::StepOfDay => T::from_usize_lossy(self.step_of_day(i)),
            CalendarFeature::DayOfWeek => T::from_usize_lossy(self.day_of_week(i)),
            CalendarFeature::Holiday => {
                if self.is_holiday(i) {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Number of complete local days, assuming the frame starts at local midnight.
    pub fn whole_days(&self) -> usize {
        self.len / self.steps_per_day()
    }

    /// Adds one column per upper series of `hierarchy`, aggregating the
    /// `bottom` columns; returns the names of all series in `S` row order.
    pub fn add_aggregates(&mut self, hierarchy: &Hierarchy, bottom: &[String]) -> Result<Vec<String>> {
        let names = hierarchy.series_names(bottom)?;
        let cols: Vec<&[T]> = bottom.iter().map(|b| self.column(b)).collect::<Result<_>>()?;
        let mut upper = Vec::with_capacity(hierarchy.n_upper());
        for i in 0..hierarchy.n_upper() {
            let members: Vec<&[T]> =
                hierarchy.row(i).iter().zip(&cols).filter(|(&s, _)| s == 1).map(|(_, &c)| c).collect();
            upper.push((0..self.len).map(|t| members.iter().map(|c| c[t]).sum()).collect::<Vec<T>>());
        }
        for (name, values) in names.iter().zip(upper) {
            self.push_column(name.clone(), values)?;
        }
        Ok(names)
    }

    /// Same data with every timestamp moved by `steps` sampling steps.
    pub fn shifted(&self, steps: i64) -> Self {
        let mut out = self.clone();
        out.start = self.start + Duration::minutes(steps * self.step_minutes as i64);
        out
    }

    /// Sub-frame over `range` of step indices.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len || range.start > range.end {
            return Err(Error::Dimension(format!("slice {range:?} of frame with {} steps", self.len)));
        }
        Ok(Self {
            start: self.timestamp(range.start),
            step_minutes: self.step_minutes,
            len: range.len(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
            utc_offset_minutes: self.utc_offset_minutes,
            holidays: self.holidays.clone(),
        })
    }
}
