//! Prompt schedules: evenly spaced recommendation dates.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

/// Dates `start, start + step, ...` up to and including `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub step_days: i64,
}

impl Schedule {
    /// Training prompts: every four weeks from 2019-08-01 to 2021-06-01.
    pub fn training() -> Self {
        Self {
            start: date(2019, 8, 1),
            end: date(2021, 6, 1),
            step_days: 28,
        }
    }

    /// Test prompts: every two weeks from 2021-12-01 to 2022-06-02.
    pub fn test() -> Self {
        Self {
            start: date(2021, 12, 1),
            end: date(2022, 6, 2),
            step_days: 14,
        }
    }

    pub fn ticks(&self) -> Vec<NaiveDate> {
        assert!(self.step_days > 0, "schedule step must be positive");
        let mut out = Vec::new();
        let mut d = self.start;
        while d <= self.end {
            out.push(d);
            d += Duration::days(self.step_days);
        }
        out
    }

    pub fn last_tick(&self) -> Option<NaiveDate> {
        self.ticks().last().copied()
    }
}

pub(crate) fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}
