//! Weather forecast tables and their alignment to the meter grid.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::raw::{parse_cell, parse_timestamp};
use crate::error::{Error, Result};
use crate::hierarchy::TimeSeriesFrame;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NwpRecord<T> {
    pub issue: NaiveDateTime,
    pub valid: NaiveDateTime,
    pub values: Vec<T>,
}

/// Forecast records tagged with their issuance time; `issue ≤ valid` always holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NwpTable<T> {
    pub variables: Vec<String>,
    pub records: Vec<NwpRecord<T>>,
}

impl<T: Scalar> NwpTable<T> {
    pub fn new(variables: Vec<String>) -> Self {
        Self { variables, records: Vec::new() }
    }

    pub fn push(&mut self, issue: NaiveDateTime, valid: NaiveDateTime, values: Vec<T>) -> Result<()> {
        if issue > valid {
            return Err(Error::Data(format!("forecast issued at {issue} for earlier time {valid}")));
        }
        if values.len() != self.variables.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} weather variables",
                values.len(),
                self.variables.len()
            )));
        }
        self.records.push(NwpRecord { issue, valid, values });
        Ok(())
    }

    /// Reads a CSV with valid time in column 1, issue time in column 2 and
    /// one column per variable. Rows with any empty cell are skipped.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let vars: Vec<String> = rdr.headers()?.iter().skip(2).map(|s| s.trim().to_string()).collect();
        let mut table = Self::new(vars);
        for rec in rdr.records() {
            let rec = rec?;
            let valid = parse_timestamp(rec.get(0).unwrap_or(""))?;
            let issue = parse_timestamp(rec.get(1).unwrap_or(""))?;
            let vals: Vec<Option<T>> = (0..table.variables.len())
                .map(|j| parse_cell(rec.get(j + 2).unwrap_or("")))
                .collect::<Result<_>>()?;
            if let Some(vals) = vals.into_iter().collect::<Option<Vec<T>>>() {
                table.push(issue, valid, vals)?;
            }
        }
        Ok(table)
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables.iter().position(|v| v == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Values of one variable in record order.
    pub fn column(&self, name: &str) -> Result<Vec<T>> {
        let j = self.variable_index(name)?;
        Ok(self.records.iter().map(|r| r.values[j]).collect())
    }

    /// Adds every variable of a grid-aligned table (as returned by
    /// [`align_nwp`]) to `frame` as a column.
    pub fn add_to_frame(&self, frame: &mut TimeSeriesFrame<T>) -> Result<()> {
        if self.records.len() != frame.len()
            || self.records.first().map(|r| r.valid) != Some(frame.start())
        {
            return Err(Error::Dimension("weather table is not aligned to the frame grid".into()));
        }
        for v in &self.variables {
            frame.push_column(v.clone(), self.column(v)?)?;
        }
        Ok(())
    }
}

struct Issuance<'a, T> {
    issue: NaiveDateTime,
    /// Records sorted by valid time.
    records: Vec<&'a NwpRecord<T>>,
}

impl<T: Scalar> Issuance<'_, T> {
    /// Value at `v` from this issuance, interpolating linearly between
    /// consecutive records no more than `max_spacing` apart.
    fn value_at(&self, v: NaiveDateTime, max_spacing: Duration) -> Option<Vec<T>> {
        let i = self.records.partition_point(|r| r.valid < v);
        let hi = self.records.get(i)?;
        if hi.valid == v {
            return Some(hi.values.clone());
        }
        let lo = self.records.get(i.checked_sub(1)?)?;
        let span = hi.valid - lo.valid;
        if span > max_spacing {
            return None;
        }
        let w = T::lit((v - lo.valid).num_seconds() as f64 / span.num_seconds() as f64);
        Some(lo.values.iter().zip(&hi.values).map(|(&a, &b)| a + w * (b - a)).collect())
    }
}

/// Resamples forecasts onto the grid `start + i·step`, `i < len`.
///
/// For each grid instant `v` the freshest issuance issued no later than
/// `v − min_lead` that covers `v` is used, interpolating linearly between
/// its records. The output records carry the chosen issuance time, so the
/// no-lookahead property can be checked afterwards.
pub fn align_nwp<T: Scalar>(
    nwp: &NwpTable<T>,
    start: NaiveDateTime,
    len: usize,
    step_minutes: u32,
    min_lead: Duration,
) -> Result<NwpTable<T>> {
    let mut grouped: BTreeMap<NaiveDateTime, Vec<&NwpRecord<T>>> = BTreeMap::new();
    for r in &nwp.records {
        grouped.entry(r.issue).or_default().push(r);
    }
    let issuances: Vec<Issuance<T>> = grouped
        .into_iter()
        .map(|(issue, mut records)| {
            records.sort_by_key(|r| r.valid);
            // Duplicate valid times within an issuance: keep the last one read.
            let mut dedup: Vec<&NwpRecord<T>> = Vec::with_capacity(records.len());
            for r in records {
                match dedup.last_mut() {
                    Some(last) if last.valid == r.valid => *last = r,
                    _ => dedup.push(r),
                }
            }
            Issuance { issue, records: dedup }
        })
        .collect();
    let max_spacing = Duration::hours(1);
    let mut out = NwpTable::new(nwp.variables.clone());
    for i in 0..len {
        let v = start + Duration::minutes(i as i64 * step_minutes as i64);
        let cutoff = v - min_lead;
        let eligible = issuances.partition_point(|s| s.issue <= cutoff);
        let found = issuances[..eligible]
            .iter()
            .rev()
            .find_map(|s| s.value_at(v, max_spacing).map(|vals| (s.issue, vals)));
        let Some((issue, vals)) = found else {
            return Err(Error::NwpGap(format!("no forecast issued by {cutoff} covers {v}")));
        };
        out.records.push(NwpRecord { issue, valid: v, values: vals });
    }
    Ok(out)
}
