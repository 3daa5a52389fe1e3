use std::collections::{BTreeSet, HashMap};

use chrono::NaiveDate;
use rust_decimal::Decimal;

use super::summary::{summarize_prices_with, TenWeekSummary, SUMMARY_WINDOW_DAYS};
use super::{GraphKind, KgError, KnowledgeGraph, Object, Predicate, Triple};
use crate::data::{Dataset, TxType};

/// Triples per PKG transaction entity.
pub(crate) const PKG_TRIPLES_PER_TX: usize = 5;
/// Metadata triples per MKG asset entity.
pub(crate) const MKG_TRIPLES_PER_ASSET: usize = 4;
/// Triples per MKG summary entity.
pub(crate) const MKG_TRIPLES_PER_SUMMARY: usize = 6;

/// Build the PKG of `customer_id` from transactions strictly before `cutoff`.
pub fn build_pkg(dataset: &Dataset, customer_id: &str, cutoff: NaiveDate) -> Result<KnowledgeGraph, KgError> {
    if dataset.profile(customer_id).is_none() {
        return Err(KgError::UnknownCustomer(customer_id.to_string()));
    }
    let mut txs: Vec<_> = dataset
        .transactions_of(customer_id)
        .filter(|t| t.timestamp < cutoff)
        .collect();
    txs.sort_by_key(|t| t.timestamp);

    let mut kg = KnowledgeGraph::new(GraphKind::Pkg);
    kg.triples.reserve(txs.len() * PKG_TRIPLES_PER_TX);
    for (n, tx) in txs.iter().enumerate() {
        let id = format!("Transaction_{}", n + 1);
        let class = match tx.tx_type {
            TxType::Buy => "BuyTransaction",
            TxType::Sell => "SellTransaction",
        };
        kg.triples.extend([
            Triple::checked(&id, Predicate::Type, Object::Iri(class.into())),
            Triple::checked(&id, Predicate::TransactionValue, Object::decimal(tx.value)),
            Triple::checked(&id, Predicate::TransactionTimestamp, Object::Date(tx.timestamp)),
            Triple::checked(&id, Predicate::InvolvesSecurity, Object::Str(tx.isin.clone())),
            Triple::checked(&id, Predicate::HasParticipant, Object::Str(tx.customer_id.clone())),
        ]);
    }
    Ok(kg)
}

/// Every complete ten-week summary per asset, computed once and filtered by
/// cutoff on demand.
#[derive(Debug, Clone, Default)]
pub struct MarketSummaries {
    by_isin: HashMap<String, Vec<TenWeekSummary>>,
}

impl MarketSummaries {
    pub fn new(dataset: &Dataset) -> Self {
        Self::with_window(dataset, SUMMARY_WINDOW_DAYS, None)
    }

    /// Summaries for the assets in `only` (all assets when `None`).
    pub fn with_window(dataset: &Dataset, window_days: i64, only: Option<&BTreeSet<String>>) -> Self {
        let by_isin = dataset
            .assets()
            .iter()
            .filter(|a| only.is_none_or(|set| set.contains(&a.isin)))
            .map(|a| {
                let bars = dataset.prices_for(&a.isin);
                (a.isin.clone(), summarize_prices_with(bars, window_days, None))
            })
            .collect();
        Self { by_isin }
    }

    /// Summaries of `isin` whose period ends strictly before `cutoff`.
    pub fn before(&self, isin: &str, cutoff: NaiveDate) -> &[TenWeekSummary] {
        match self.by_isin.get(isin) {
            Some(all) => &all[..all.partition_point(|s| s.period_end_date < cutoff)],
            None => &[],
        }
    }

    /// MKG triples an asset contributes at `cutoff`.
    pub fn triple_cost(&self, isin: &str, cutoff: NaiveDate) -> usize {
        MKG_TRIPLES_PER_ASSET + MKG_TRIPLES_PER_SUMMARY * self.before(isin, cutoff).len()
    }
}

/// Build the MKG at `cutoff`. `asset_filter = None` includes every asset.
pub fn build_mkg(dataset: &Dataset, cutoff: NaiveDate, asset_filter: Option<&BTreeSet<String>>) -> KnowledgeGraph {
    let summaries = MarketSummaries::with_window(dataset, SUMMARY_WINDOW_DAYS, asset_filter);
    build_mkg_from(&summaries, dataset, cutoff, asset_filter)
}

/// Build the MKG from precomputed summaries.
pub fn build_mkg_from(
    summaries: &MarketSummaries,
    dataset: &Dataset,
    cutoff: NaiveDate,
    asset_filter: Option<&BTreeSet<String>>,
) -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::new(GraphKind::Mkg);
    let mut summary_no = 0usize;
    let included = dataset
        .assets()
        .iter()
        .filter(|a| asset_filter.is_none_or(|set| set.contains(&a.isin)));
    for (k, asset) in included.enumerate() {
        let asset_id = format!("Asset_{}", k + 1);
        kg.triples.extend([
            Triple::checked(&asset_id, Predicate::Identifier, Object::Str(asset.isin.clone())),
            Triple::checked(&asset_id, Predicate::Category, Object::Str(asset.category.clone())),
            Triple::checked(&asset_id, Predicate::Sector, Object::Str(asset.sector.clone())),
            Triple::checked(&asset_id, Predicate::Industry, Object::Str(asset.industry.clone())),
        ]);
        for s in summaries.before(&asset.isin, cutoff) {
            summary_no += 1;
            let id = format!("TenWeekPriceSummary_{summary_no}");
            kg.triples.extend([
                Triple::checked(&id, Predicate::PriceOf, Object::Iri(asset_id.clone())),
                Triple::checked(&id, Predicate::PeriodEndPrice, Object::decimal(s.end)),
                Triple::checked(&id, Predicate::PeriodAveragePrice, Object::decimal(s.avg)),
                Triple::checked(&id, Predicate::PeriodHighPrice, Object::decimal(s.high)),
                Triple::checked(&id, Predicate::PeriodLowPrice, Object::decimal(s.low)),
                Triple::checked(&id, Predicate::PeriodEndDate, Object::Date(s.period_end_date)),
            ]);
        }
    }
    kg
}

/// Default MKG asset selection for a prompt.
///
/// Starts from the assets the customer traded before `cutoff`, then adds the
/// remaining assets by total traded value before `cutoff` (descending, ties by
/// ISIN) while their triples fit in `budget`. `max_extra` bounds how many
/// non-owned assets are added.
pub fn select_mkg_assets(
    dataset: &Dataset,
    summaries: &MarketSummaries,
    customer_id: &str,
    cutoff: NaiveDate,
    budget: usize,
    max_extra: Option<usize>,
) -> BTreeSet<String> {
    let mut traded: HashMap<&str, Decimal> = HashMap::new();
    let mut selected = BTreeSet::new();
    for t in dataset.transactions().iter().filter(|t| t.timestamp < cutoff) {
        *traded.entry(t.isin.as_str()).or_default() += t.value;
        if t.customer_id == customer_id {
            selected.insert(t.isin.clone());
        }
    }
    let mut used: usize = selected.iter().map(|i| summaries.triple_cost(i, cutoff)).sum();

    let mut others: Vec<(&str, Decimal)> = dataset
        .assets()
        .iter()
        .filter(|a| !selected.contains(&a.isin))
        .map(|a| (a.isin.as_str(), traded.get(a.isin.as_str()).copied().unwrap_or_default()))
        .collect();
    others.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut extra = 0;
    for (isin, _) in others {
        if max_extra.is_some_and(|m| extra >= m) {
            break;
        }
        let cost = summaries.triple_cost(isin, cutoff);
        if used + cost > budget {
            break;
        }
        used += cost;
        extra += 1;
        selected.insert(isin.to_string());
    }
    selected
}
