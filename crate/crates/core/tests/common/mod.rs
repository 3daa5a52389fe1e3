//! Fixtures shared by the integration suites.
#![allow(dead_code)]

pub mod kg;

use std::collections::BTreeSet;

use chrono::NaiveDate;
use finalign::data::{generate_synthetic, CustomerType, RiskLevel, TxType};
use finalign::{Asset, CustomerProfile, Dataset, PriceBar, Transaction};
use rust_decimal::Decimal;

pub const TRADE_CUSTOMER: &str = "00017496858921195E5A";
pub const TRADE_ISIN: &str = "GRS434003000";
pub const SERIES_ISIN: &str = "GRS495003006";

pub fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

pub fn dec(s: &str) -> Decimal {
    s.parse().unwrap()
}

pub fn asset(isin: &str, category: &str, sector: &str, industry: &str) -> Asset {
    Asset {
        isin: isin.into(),
        category: category.into(),
        sector: sector.into(),
        industry: industry.into(),
    }
}

pub fn profile(id: &str) -> CustomerProfile {
    CustomerProfile {
        customer_id: id.into(),
        customer_type: CustomerType::Mass,
        risk_level: RiskLevel::Moderate,
        investment_capacity: dec("50000"),
    }
}

pub fn bar(isin: &str, date: NaiveDate, close: &str) -> PriceBar {
    PriceBar {
        isin: isin.into(),
        date,
        close: dec(close),
    }
}

pub fn trade_transaction() -> Transaction {
    Transaction {
        customer_id: TRADE_CUSTOMER.into(),
        isin: TRADE_ISIN.into(),
        tx_type: TxType::Sell,
        value: dec("11000"),
        timestamp: d(2020, 3, 27),
    }
}

/// One customer, one asset priced around the single Sell.
pub fn trade_dataset() -> Dataset {
    Dataset::new(
        vec![trade_transaction()],
        vec![bar(TRADE_ISIN, d(2020, 1, 2), "4.1"), bar(TRADE_ISIN, d(2020, 12, 30), "5.2")],
        vec![asset(TRADE_ISIN, "Stock", "Utilities", "Water Utilities")],
        vec![profile(TRADE_CUSTOMER)],
    )
    .unwrap()
}

/// Five closes inside one 70-day window starting 2018-03-19: high 9.5,
/// low and last 8.54, mean 9.1679792. A sixth bar past the window end
/// completes it.
pub fn series_bars() -> Vec<PriceBar> {
    vec![
        bar(SERIES_ISIN, d(2018, 3, 19), "9.5"),
        bar(SERIES_ISIN, d(2018, 4, 2), "9.5"),
        bar(SERIES_ISIN, d(2018, 4, 16), "9.5"),
        bar(SERIES_ISIN, d(2018, 5, 1), "8.799896"),
        bar(SERIES_ISIN, d(2018, 5, 27), "8.54"),
        bar(SERIES_ISIN, d(2018, 6, 4), "8.6"),
    ]
}

pub fn series_dataset() -> Dataset {
    Dataset::new(
        Vec::new(),
        series_bars(),
        vec![asset(SERIES_ISIN, "Stock", "Industrials", "Airlines")],
        vec![profile("C0")],
    )
    .unwrap()
}

pub const SYNTH_SEED: u64 = 7;

/// 50 users and 30 assets over a range covering both schedules plus the
/// 180-day horizon.
pub fn desk_dataset(seed: u64) -> Dataset {
    generate_synthetic(seed, 50, 30, d(2018, 1, 2), d(2022, 11, 29)).unwrap()
}

pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Writes a label-only corpus file for `client`; trainers read nothing else.
pub fn label_corpus(dir: &std::path::Path, client: usize, labels: &[bool]) -> finalign::federation::ClientCorpus {
    let path = dir.join(format!("labels_{client:02}.jsonl"));
    let mut text = String::new();
    for l in labels {
        text.push_str(&format!("{{\"messages\":[],\"completion\":\"- X\",\"label\":{l}}}\n"));
    }
    std::fs::write(&path, text).unwrap();
    finalign::federation::ClientCorpus {
        client_id: client,
        path,
        examples: labels.len(),
    }
}

/// Alternating-label corpora of varying length for `n` clients.
pub fn toy_corpora(dir: &std::path::Path, n: usize) -> Vec<finalign::federation::ClientCorpus> {
    (0..n)
        .map(|c| {
            let labels: Vec<bool> = (0..10 + 3 * c).map(|i| (i + c) % 2 == 0).collect();
            label_corpus(dir, c, &labels)
        })
        .collect()
}

/// Small LoRA-shaped adapter for fast simulations.
pub fn small_adapter(seed: u64) -> finalign::AdapterTensors {
    let shape = finalign::trainer::LoraShape {
        layers: vec!["q".into(), "v".into()],
        hidden: 8,
        rank: 4,
        ..Default::default()
    };
    finalign::trainer::toy_adapter(&shape, seed)
}

/// Outcome sets scanned directly from the raw tables, one (customer, asset)
/// pair at a time: (purchased, profitable, desirable).
pub fn brute_force_outcomes(
    ds: &Dataset,
    customer: &str,
    date: NaiveDate,
    horizon: i64,
) -> (BTreeSet<String>, BTreeSet<String>, BTreeSet<String>) {
    let end = date + chrono::Duration::days(horizon);
    let mut purchased = BTreeSet::new();
    let mut profitable = BTreeSet::new();
    let mut desirable = BTreeSet::new();
    for a in ds.assets() {
        let bought = ds.transactions().iter().any(|t| {
            t.customer_id == customer
                && t.isin == a.isin
                && t.tx_type == TxType::Buy
                && t.timestamp > date
                && t.timestamp <= end
        });
        let window: Vec<(NaiveDate, Decimal)> = ds
            .prices()
            .iter()
            .filter(|p| p.isin == a.isin && p.date >= date && p.date <= end)
            .map(|p| (p.date, p.close))
            .collect();
        let first = window.iter().min_by_key(|x| x.0);
        let last = window.iter().max_by_key(|x| x.0);
        let gain = matches!((first, last), (Some(f), Some(l)) if l.1 > f.1);
        if bought {
            purchased.insert(a.isin.clone());
        }
        if gain {
            profitable.insert(a.isin.clone());
        }
        if bought && gain {
            desirable.insert(a.isin.clone());
        }
    }
    (purchased, profitable, desirable)
}

/// Every asset trends up and every customer buys often, so every prompt has
/// desirable assets and a non-empty undesirable pool.
pub fn always_complete_dataset(seed: u64) -> Dataset {
    finalign::data::generate_with(
        seed,
        &finalign::data::SynthConfig {
            n_users: 20,
            n_assets: 30,
            drift: 0.5,
            volatility: 0.0,
            mean_days_between_trades: 5.0,
            buy_probability: 1.0,
            max_assets_per_user: 3,
            ..Default::default()
        },
    )
    .unwrap()
}
