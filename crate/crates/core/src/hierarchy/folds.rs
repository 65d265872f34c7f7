//! Blocked cross-validation over 10-day sequences.
//!
//! Each sequence uses days 1–7 for training, discards days 8 and 10 and tests
//! on day 9. Fold `f` starts its sequences `f` days after fold 0, so stacking
//! the folds' test days covers the whole span.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::embed::EmbeddingSpec;
use crate::error::{Error, Result};

pub const SEQUENCE_DAYS: usize = 10;
pub const TRAIN_DAYS: usize = 7;
/// Zero-based day of a sequence that holds the test targets.
pub const TEST_DAY: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DayRole {
    Train,
    Discard,
    Test,
}

/// Which issue times of a sequence become test rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestRows {
    /// Embedding window inside day 8, targets inside day 9: one row per
    /// sequence when `embed, horizon ≤ steps_per_day`.
    #[default]
    DayBoundary,
    /// Every issue time whose embedding window starts in day 8 or later,
    /// whose targets start in day 9 and end by day 10.
    FullDay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence {
    pub start_day: usize,
}

impl Sequence {
    pub fn role(&self, day_in_sequence: usize) -> DayRole {
        match day_in_sequence {
            d if d < TRAIN_DAYS => DayRole::Train,
            TEST_DAY => DayRole::Test,
            _ => DayRole::Discard,
        }
    }

    pub fn test_day(&self) -> usize {
        self.start_day + TEST_DAY
    }

    /// Step range of the training days.
    pub fn train_steps(&self, steps_per_day: usize) -> Range<usize> {
        self.start_day * steps_per_day..(self.start_day + TRAIN_DAYS) * steps_per_day
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub sequences: Vec<Sequence>,
}

/// Row indices of one fold inside a [`SamplePair`](super::SamplePair).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FoldRows {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Sequence (position in `Fold::sequences`) of each training row.
    pub train_sequence: Vec<usize>,
    pub test_sequence: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub span_days: usize,
    pub steps_per_day: usize,
    pub embed: usize,
    pub horizon: usize,
    pub test_rows: TestRows,
    pub folds: Vec<Fold>,
}

/// Plans `k` folds over `span_days` whole days.
pub fn build_folds(
    span_days: usize,
    spec: &EmbeddingSpec,
    k: usize,
    steps_per_day: usize,
    test_rows: TestRows,
) -> Result<FoldPlan> {
    spec.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument("at least one fold is required".into()));
    }
    if span_days < SEQUENCE_DAYS + k {
        return Err(Error::TooShort { needed: SEQUENCE_DAYS + k - 1, available: span_days });
    }
    if spec.embed > steps_per_day || spec.horizon > steps_per_day {
        return Err(Error::InvalidArgument(format!(
            "embedding ({}) and horizon ({}) must not exceed one day ({steps_per_day} steps)",
            spec.embed, spec.horizon
        )));
    }
    let folds = (0..k)
        .map(|f| Fold {
            index: f,
            sequences: (0..)
                .map(|m| Sequence { start_day: f + m * SEQUENCE_DAYS })
                .take_while(|s| s.start_day + SEQUENCE_DAYS <= span_days)
                .collect(),
        })
        .collect();
    Ok(FoldPlan {
        k,
        span_days,
        steps_per_day,
        embed: spec.embed,
        horizon: spec.horizon,
        test_rows,
        folds,
    })
}

impl FoldPlan {
    /// Steps touched by the sample issued at `t`: `[t − e + 1, t + h]`.
    pub fn window(&self, t: usize) -> Option<Range<usize>> {
        let lo = (t + 1).checked_sub(self.embed)?;
        Some(lo..t + self.horizon + 1)
    }

    fn day_start(&self, day: usize) -> usize {
        day * self.steps_per_day
    }

    pub fn is_train_issue(&self, seq: &Sequence, t: usize) -> bool {
        let Some(w) = self.window(t) else { return false };
        let block = seq.train_steps(self.steps_per_day);
        w.start >= block.start && w.end <= block.end
    }

    pub fn is_test_issue(&self, seq: &Sequence, t: usize) -> bool {
        let Some(w) = self.window(t) else { return false };
        let day8 = self.day_start(seq.start_day + TEST_DAY - 1);
        let day9 = self.day_start(seq.start_day + TEST_DAY);
        let end = match self.test_rows {
            TestRows::DayBoundary => {
                if t >= day9 {
                    return false;
                }
                day9 + self.steps_per_day
            }
            TestRows::FullDay => day9 + 2 * self.steps_per_day,
        };
        w.start >= day8 && t + 1 >= day9 && w.end <= end
    }

    /// Splits sampled issue indices into this fold's training and test rows.
    pub fn rows(&self, fold: usize, issue_index: &[usize]) -> FoldRows {
        let mut rows = FoldRows::default();
        let seqs = &self.folds[fold].sequences;
        for (r, &t) in issue_index.iter().enumerate() {
            let day = t / self.steps_per_day;
            for (si, s) in seqs.iter().enumerate() {
                if day < s.start_day || day >= s.start_day + SEQUENCE_DAYS {
                    continue;
                }
                if self.is_train_issue(s, t) {
                    rows.train.push(r);
                    rows.train_sequence.push(si);
                } else if self.is_test_issue(s, t) {
                    rows.test.push(r);
                    rows.test_sequence.push(si);
                }
            }
        }
        rows
    }

    pub fn test_days(&self, fold: usize) -> Vec<usize> {
        self.folds[fold].sequences.iter().map(Sequence::test_day).collect()
    }

    pub fn train_days(&self, fold: usize) -> usize {
        self.folds[fold].sequences.len() * TRAIN_DAYS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(h: usize, e: usize) -> EmbeddingSpec {
        EmbeddingSpec { horizon: h, embed: e, ..EmbeddingSpec::default() }
    }

    #[test]
    fn thirty_days_one_fold() {
        let plan = build_folds(30, &spec(144, 144), 1, 144, TestRows::DayBoundary).unwrap();
        assert_eq!(plan.folds[0].sequences.len(), 3);
        assert_eq!(plan.train_days(0), 21);
        assert_eq!(plan.test_days(0), vec![8, 18, 28]);
    }

    #[test]
    fn too_short_span() {
        assert!(build_folds(19, &spec(144, 144), 10, 144, TestRows::DayBoundary).is_err());
        assert!(build_folds(20, &spec(144, 144), 10, 144, TestRows::DayBoundary).is_ok());
    }

    #[test]
    fn one_boundary_row_per_sequence() {
        let plan = build_folds(30, &spec(144, 144), 1, 144, TestRows::DayBoundary).unwrap();
        let issues: Vec<usize> = (144..30 * 144 - 144).collect();
        let rows = plan.rows(0, &issues);
        assert_eq!(rows.test.len(), 3);
        assert_eq!(issues[rows.test[0]], 8 * 144 - 1);
        // 7 training days hold 1008 − 288 + 1 windows of 288 steps; the
        // first sequence loses one because sampling starts at issue 144.
        assert_eq!(rows.train.len(), 3 * 721 - 1);
    }

    #[test]
    fn full_day_rows() {
        let plan = build_folds(30, &spec(144, 144), 1, 144, TestRows::FullDay).unwrap();
        let issues: Vec<usize> = (144..30 * 144 - 144).collect();
        let rows = plan.rows(0, &issues);
        assert_eq!(rows.test.len(), 2 * 145 + 145);
        let first = issues[rows.test[0]];
        assert_eq!(first, 8 * 144 - 1);
    }

    #[test]
    fn train_and_test_disjoint() {
        let plan = build_folds(40, &spec(6, 4), 3, 8, TestRows::FullDay).unwrap();
        let issues: Vec<usize> = (4..40 * 8 - 6).collect();
        for f in 0..3 {
            let rows = plan.rows(f, &issues);
            assert!(rows.train.iter().all(|r| !rows.test.contains(r)));
        }
    }
}
