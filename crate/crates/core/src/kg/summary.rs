//! Ten-week price summaries.
//!
//! Windows are consecutive, non-overlapping runs of 70 calendar days anchored
//! at the asset's first bar. A window is emitted only when the series reaches
//! its last day and it holds at least one bar.

use chrono::{Duration, NaiveDate};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::data::PriceBar;

pub const SUMMARY_WINDOW_DAYS: i64 = 70;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenWeekSummary {
    pub isin: String,
    pub period_start: NaiveDate,
    pub period_end_date: NaiveDate,
    pub high: Decimal,
    pub low: Decimal,
    pub avg: Decimal,
    pub end: Decimal,
}

/// Summaries of `bars` whose period ends strictly before `cutoff`.
pub fn summarize_prices(bars: &[PriceBar], cutoff: NaiveDate) -> Vec<TenWeekSummary> {
    summarize_prices_with(bars, SUMMARY_WINDOW_DAYS, Some(cutoff))
}

/// Like [`summarize_prices`] with a configurable window; `None` keeps every
/// complete window.
pub fn summarize_prices_with(
    bars: &[PriceBar],
    window_days: i64,
    cutoff: Option<NaiveDate>,
) -> Vec<TenWeekSummary> {
    assert!(window_days > 0, "window must span at least one day");
    let (Some(first), Some(last)) = (bars.first(), bars.last()) else {
        return Vec::new();
    };
    debug_assert!(bars.windows(2).all(|w| w[0].date < w[1].date));
    debug_assert!(bars.iter().all(|b| b.isin == first.isin));

    let mut out = Vec::new();
    let mut start = first.date;
    let mut i = 0;
    loop {
        let period_end = start + Duration::days(window_days - 1);
        if period_end > last.date || cutoff.is_some_and(|c| period_end >= c) {
            break;
        }
        let next = start + Duration::days(window_days);
        let from = i;
        while i < bars.len() && bars[i].date < next {
            i += 1;
        }
        let window = &bars[from..i];
        if let (Some(first_bar), Some(last_bar)) = (window.first(), window.last()) {
            let mut high = first_bar.close;
            let mut low = first_bar.close;
            let mut sum = Decimal::ZERO;
            for b in window {
                high = high.max(b.close);
                low = low.min(b.close);
                sum += b.close;
            }
            let avg = (sum / Decimal::from(window.len() as u64)).normalize();
            out.push(TenWeekSummary {
                isin: first.isin.clone(),
                period_start: start,
                period_end_date: period_end,
                high: high.normalize(),
                low: low.normalize(),
                avg,
                end: last_bar.close.normalize(),
            });
        }
        start = next;
    }
    out
}
