//! Outcome labelling and binary-feedback corpora.
//!
//! For a customer and a recommendation date, an asset is *purchased* if the
//! customer bought it in `(date, date + horizon]`, *profitable* if its close
//! rose over the same window, and *desirable* if both hold. Each prompt yields
//! a label-true completion listing desirable assets and a label-false
//! completion listing sampled non-desirable ones.

mod context;
mod corpus;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use rand::seq::index::sample;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, PriceBar, TxType};
use crate::prompt::{render_completion, ChatMessage, PromptError, PromptInstance, DEFAULT_INTRO};
use crate::seed::rng_for;

pub use context::{ContextError, KgSettings, PromptContext};
pub use corpus::{
    build_training_corpus, client_file_name, covered_ticks, read_corpus, read_labels, write_corpus, Corpus,
    CorpusConfig, CorpusStats,
};

pub const DEFAULT_HORIZON_DAYS: i64 = 180;

/// Calendar slack allowed between the last price bar and a window end, so a
/// window ending on a weekend or holiday still counts as covered.
pub const COVERAGE_SLACK_DAYS: i64 = 4;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("no price data for {isin} in {from}..={to}")]
    NoPriceData {
        isin: String,
        from: NaiveDate,
        to: NaiveDate,
    },
    #[error("unknown customer {0}")]
    UnknownCustomer(String),
    #[error("empty asset universe")]
    EmptyUniverse,
    #[error("dataset prices {have} do not cover the window {need}")]
    WindowUncovered { have: String, need: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Context(#[from] ContextError),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutcomeSets {
    pub purchased: BTreeSet<String>,
    pub profitable: BTreeSet<String>,
    pub desirable: BTreeSet<String>,
    /// Horizon returns of every asset with price data in the window.
    #[serde(default)]
    pub returns: BTreeMap<String, f64>,
}

impl OutcomeSets {
    /// Outcome sets with `desirable = purchased ∩ profitable` and no returns.
    pub fn new(purchased: BTreeSet<String>, profitable: BTreeSet<String>) -> Self {
        let desirable = purchased.intersection(&profitable).cloned().collect();
        Self {
            purchased,
            profitable,
            desirable,
            returns: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KtoExample {
    pub messages: Vec<ChatMessage>,
    pub completion: String,
    pub label: bool,
}

fn window_endpoints(bars: &[PriceBar], date: NaiveDate, horizon_days: i64) -> Option<(&PriceBar, &PriceBar)> {
    let end_date = date + Duration::days(horizon_days);
    let start = bars.partition_point(|b| b.date < date);
    let end = bars.partition_point(|b| b.date <= end_date);
    if start >= end {
        return None;
    }
    Some((&bars[start], &bars[end - 1]))
}

/// Exact horizon return from one asset's date-sorted bars.
pub(crate) fn decimal_return(bars: &[PriceBar], date: NaiveDate, horizon_days: i64) -> Option<Decimal> {
    let (first, last) = window_endpoints(bars, date, horizon_days)?;
    Some((last.close - first.close) / first.close)
}

/// `(P_end - P_start) / P_start`, with `P_start` the first close on or after
/// `date` and `P_end` the last close on or before `date + horizon_days`.
///
/// `prices` may hold several assets; only bars of `isin` are used.
pub fn asset_return(prices: &[PriceBar], isin: &str, date: NaiveDate, horizon_days: i64) -> Result<f64, AlignmentError> {
    let mut bars: Vec<PriceBar> = prices.iter().filter(|b| b.isin == isin).cloned().collect();
    bars.sort_by_key(|b| b.date);
    decimal_return(&bars, date, horizon_days)
        .map(|r| r.to_f64().unwrap_or(0.0))
        .ok_or_else(|| AlignmentError::NoPriceData {
            isin: isin.to_string(),
            from: date,
            to: date + Duration::days(horizon_days),
        })
}

/// Horizon returns of every asset at one date, shared across customers.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketReturns {
    pub date: NaiveDate,
    pub horizon_days: i64,
    returns: BTreeMap<String, Decimal>,
}

impl MarketReturns {
    pub fn at(dataset: &Dataset, date: NaiveDate, horizon_days: i64) -> Self {
        let mut returns = BTreeMap::new();
        for asset in dataset.assets() {
            match decimal_return(dataset.prices_for(&asset.isin), date, horizon_days) {
                Some(r) => {
                    returns.insert(asset.isin.clone(), r);
                }
                None => log::warn!("no price data for {} after {date}; not profitable", asset.isin),
            }
        }
        Self {
            date,
            horizon_days,
            returns,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Assets with price data in the window.
    pub fn covered(&self) -> BTreeSet<String> {
        self.returns.keys().cloned().collect()
    }

    pub fn profitable(&self) -> BTreeSet<String> {
        self.returns
            .iter()
            .filter(|(_, r)| **r > Decimal::ZERO)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn as_f64(&self) -> BTreeMap<String, f64> {
        self.returns
            .iter()
            .map(|(k, r)| (k.clone(), r.to_f64().unwrap_or(0.0)))
            .collect()
    }
}

/// Outcome sets for one customer and date.
pub fn compute_outcomes(
    dataset: &Dataset,
    customer_id: &str,
    date: NaiveDate,
    horizon_days: i64,
) -> Result<OutcomeSets, AlignmentError> {
    let market = MarketReturns::at(dataset, date, horizon_days);
    compute_outcomes_with(dataset, &market, customer_id)
}

/// [`compute_outcomes`] with precomputed market returns.
pub fn compute_outcomes_with(
    dataset: &Dataset,
    market: &MarketReturns,
    customer_id: &str,
) -> Result<OutcomeSets, AlignmentError> {
    if dataset.profile(customer_id).is_none() {
        return Err(AlignmentError::UnknownCustomer(customer_id.to_string()));
    }
    let end = market.date + Duration::days(market.horizon_days);
    let purchased: BTreeSet<String> = dataset
        .transactions_of(customer_id)
        .filter(|t| t.tx_type == TxType::Buy && t.timestamp > market.date && t.timestamp <= end)
        .map(|t| t.isin.clone())
        .collect();
    let mut out = OutcomeSets::new(purchased, market.profitable());
    out.returns = market.as_f64();
    Ok(out)
}

/// Build the label-true and label-false examples for one prompt.
///
/// The label-true completion lists up to `max_assets` desirable assets by
/// descending return; the label-false completion lists up to `max_assets`
/// assets sampled from `universe \ desirable`. Either is omitted when it
/// would be empty.
pub fn build_kto_pair(
    instance: &PromptInstance,
    outcomes: &OutcomeSets,
    universe: &BTreeSet<String>,
    max_assets: usize,
    seed: u64,
) -> Result<Vec<KtoExample>, AlignmentError> {
    if universe.is_empty() {
        return Err(AlignmentError::EmptyUniverse);
    }
    let mut out = Vec::with_capacity(2);

    let mut desirable: Vec<&String> = outcomes.desirable.iter().collect();
    desirable.sort_by(|a, b| {
        let ra = outcomes.returns.get(*a).copied().unwrap_or(f64::NEG_INFINITY);
        let rb = outcomes.returns.get(*b).copied().unwrap_or(f64::NEG_INFINITY);
        rb.total_cmp(&ra).then_with(|| a.cmp(b))
    });
    desirable.truncate(max_assets);
    if !desirable.is_empty() {
        out.push(KtoExample {
            messages: instance.messages.clone(),
            completion: render_completion(&desirable, DEFAULT_INTRO)?,
            label: true,
        });
    }

    let pool: Vec<&String> = universe.difference(&outcomes.desirable).collect();
    let take = max_assets.min(pool.len());
    if take > 0 {
        let date = instance.recommendation_date.to_string();
        let mut rng = rng_for(seed, &["undesirable", &instance.customer_id, &date]);
        let picked: Vec<&String> = sample(&mut rng, pool.len(), take).into_iter().map(|i| pool[i]).collect();
        out.push(KtoExample {
            messages: instance.messages.clone(),
            completion: render_completion(&picked, DEFAULT_INTRO)?,
            label: false,
        });
    }
    Ok(out)
}

pub(crate) fn check_coverage(
    dataset: &Dataset,
    first: NaiveDate,
    last_window_end: NaiveDate,
) -> Result<(), AlignmentError> {
    let need = format!("{first}..{last_window_end}");
    let Some((lo, hi)) = dataset.date_range() else {
        return Err(AlignmentError::WindowUncovered {
            have: "no prices".into(),
            need,
        });
    };
    if lo > first || hi + Duration::days(COVERAGE_SLACK_DAYS) < last_window_end {
        return Err(AlignmentError::WindowUncovered {
            have: format!("{lo}..{hi}"),
            need,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{parse_response, Ablation};
    use crate::schedule::date;

    fn bars(points: &[(NaiveDate, &str)]) -> Vec<PriceBar> {
        points
            .iter()
            .map(|(d, c)| PriceBar {
                isin: "A".into(),
                date: *d,
                close: c.parse().unwrap(),
            })
            .collect()
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn instance() -> PromptInstance {
        PromptInstance {
            customer_id: "C".into(),
            recommendation_date: date(2020, 1, 1),
            ablation: Ablation::Nothing,
            messages: crate::prompt::build_messages(None, None, date(2020, 1, 1), Ablation::Nothing).unwrap(),
        }
    }

    #[test]
    fn flat_series_zero_return() {
        let b = bars(&[(date(2020, 1, 2), "3"), (date(2020, 3, 2), "3")]);
        assert_eq!(asset_return(&b, "A", date(2020, 1, 1), 180).unwrap(), 0.0);
    }

    #[test]
    fn arithmetic_return() {
        let b = bars(&[
            (date(2019, 12, 31), "1"),
            (date(2020, 1, 2), "10.0"),
            (date(2020, 6, 29), "12.5"),
            (date(2020, 7, 30), "99"),
        ]);
        assert_eq!(asset_return(&b, "A", date(2020, 1, 2), 180).unwrap(), 0.25);
    }

    #[test]
    fn missing_data() {
        let b = bars(&[(date(2019, 1, 1), "1")]);
        assert!(matches!(
            asset_return(&b, "A", date(2020, 1, 1), 180),
            Err(AlignmentError::NoPriceData { .. })
        ));
        assert!(asset_return(&b, "B", date(2018, 1, 1), 1000).is_err());
    }

    #[test]
    fn set_algebra() {
        let o = OutcomeSets::new(set(&["A", "B"]), set(&["A", "C"]));
        assert_eq!(o.desirable, set(&["A"]));
    }

    #[test]
    fn pair_forced_by_sets() {
        let o = OutcomeSets::new(set(&["A"]), set(&["A"]));
        let pair = build_kto_pair(&instance(), &o, &set(&["A", "B", "C"]), 20, 1).unwrap();
        assert_eq!(pair.len(), 2);
        assert!(pair[0].label);
        assert_eq!(pair[0].completion, format!("{DEFAULT_INTRO}\n- A"));
        assert!(!pair[1].label);
        let neg = parse_response(&pair[1].completion).isins;
        assert_eq!(neg.len(), 2);
        assert!(neg.iter().all(|x| x == "B" || x == "C"));
    }

    #[test]
    fn desirable_truncated_to_twenty_by_return() {
        let names: Vec<String> = (0..25).map(|i| format!("D{i:02}")).collect();
        let all: BTreeSet<String> = names.iter().cloned().collect();
        let mut o = OutcomeSets::new(all.clone(), all.clone());
        for (i, n) in names.iter().enumerate() {
            o.returns.insert(n.clone(), i as f64);
        }
        let pair = build_kto_pair(&instance(), &o, &all, 20, 1).unwrap();
        assert_eq!(pair.len(), 1, "no non-desirable assets to sample");
        let listed = parse_response(&pair[0].completion).isins;
        assert_eq!(listed.len(), 20);
        assert_eq!(listed[0], "D24");
        assert_eq!(listed[19], "D05");
    }

    #[test]
    fn no_desirable_only_negative() {
        let o = OutcomeSets::new(set(&[]), set(&["A"]));
        let pair = build_kto_pair(&instance(), &o, &set(&["A", "B"]), 20, 1).unwrap();
        assert_eq!(pair.len(), 1);
        assert!(!pair[0].label);
    }

    #[test]
    fn empty_universe() {
        let o = OutcomeSets::default();
        assert!(matches!(
            build_kto_pair(&instance(), &o, &BTreeSet::new(), 20, 1),
            Err(AlignmentError::EmptyUniverse)
        ));
    }

    #[test]
    fn pair_deterministic() {
        let o = OutcomeSets::new(set(&["A"]), set(&["A"]));
        let u: BTreeSet<String> = (0..50).map(|i| format!("X{i}")).chain(["A".to_string()]).collect();
        let a = build_kto_pair(&instance(), &o, &u, 20, 42).unwrap();
        let b = build_kto_pair(&instance(), &o, &u, 20, 42).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = build_kto_pair(&instance(), &o, &u, 20, 43).unwrap();
        assert_ne!(a[1].completion, c[1].completion);
    }
}
