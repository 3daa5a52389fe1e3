//! Seeded synthetic data shaped like the FAR-Trans tables.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rust_decimal::prelude::FromPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{Asset, CustomerProfile, CustomerType, DataError, Dataset, PriceBar, RiskLevel, Transaction, TxType};
use crate::seed::rng_for;

const SECTORS: [(&str, &[&str]); 6] = [
    ("Industrials", &["Airlines", "Construction", "Machinery"]),
    ("Financial Services", &["Banks", "Insurance"]),
    ("Energy", &["Oil & Gas", "Utilities"]),
    ("Technology", &["Software", "Semiconductors"]),
    ("Consumer Defensive", &["Food", "Beverages"]),
    ("Healthcare", &["Pharmaceuticals", "Medical Devices"]),
];

/// Knobs for [`generate_with`]. [`generate_synthetic`] uses the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_assets: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Annualised log-drift of the price walk.
    pub drift: f64,
    /// Annualised volatility of the price walk.
    pub volatility: f64,
    /// Mean calendar days between a customer's trades.
    pub mean_days_between_trades: f64,
    /// Probability that a trade is a Buy.
    pub buy_probability: f64,
    /// Upper bound on the number of assets a customer trades.
    pub max_assets_per_user: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 50,
            n_assets: 30,
            start: NaiveDate::from_ymd_opt(2018, 1, 2).unwrap(),
            end: NaiveDate::from_ymd_opt(2022, 11, 29).unwrap(),
            drift: 0.03,
            volatility: 0.30,
            mean_days_between_trades: 21.0,
            buy_probability: 0.75,
            max_assets_per_user: 6,
        }
    }
}

/// Generate a dataset with default knobs.
pub fn generate_synthetic(
    seed: u64,
    n_users: usize,
    n_assets: usize,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<Dataset, DataError> {
    generate_with(
        seed,
        &SynthConfig {
            n_users,
            n_assets,
            start,
            end,
            ..SynthConfig::default()
        },
    )
}

fn is_weekday(d: NaiveDate) -> bool {
    !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

fn round_dp(x: f64, dp: u32) -> Decimal {
    Decimal::from_f64(x)
        .expect("finite value")
        .round_dp(dp)
        .normalize()
}

pub fn generate_with(seed: u64, cfg: &SynthConfig) -> Result<Dataset, DataError> {
    if cfg.n_users == 0 || cfg.n_assets == 0 {
        return Err(DataError::InvalidRange("n_users and n_assets must be >= 1".into()));
    }
    if cfg.start >= cfg.end {
        return Err(DataError::InvalidRange(format!(
            "start {} must precede end {}",
            cfg.start, cfg.end
        )));
    }
    if !(cfg.mean_days_between_trades > 0.0) || !(0.0..=1.0).contains(&cfg.buy_probability) {
        return Err(DataError::InvalidRange("bad trade parameters".into()));
    }
    let days: Vec<NaiveDate> = cfg
        .start
        .iter_days()
        .take_while(|d| *d <= cfg.end)
        .filter(|d| is_weekday(*d))
        .collect();
    if days.is_empty() {
        return Err(DataError::InvalidRange("range contains no trading days".into()));
    }

    let mut rng = rng_for(seed, &["assets"]);
    let mut assets = Vec::with_capacity(cfg.n_assets);
    for i in 0..cfg.n_assets {
        let (sector, industries) = SECTORS.choose(&mut rng).expect("non-empty");
        let category = if rng.random::<f64>() < 0.85 { "Stock" } else { "Bond" };
        assets.push(Asset {
            isin: format!("XS{:04}{:06}", i, rng.random_range(0..1_000_000u32)),
            category: category.to_string(),
            sector: sector.to_string(),
            industry: industries.choose(&mut rng).expect("non-empty").to_string(),
        });
    }

    let dt = 1.0 / 252.0;
    let mut prices = Vec::with_capacity(cfg.n_assets * days.len());
    for asset in &assets {
        let mut rng = rng_for(seed, &["prices", &asset.isin]);
        let mut level: f64 = rng.random_range(5.0..100.0);
        let sigma = cfg.volatility * rng.random_range(0.5..1.5);
        let mu = cfg.drift + rng.random_range(-0.05..0.05) * (cfg.volatility > 0.0) as u8 as f64;
        for day in &days {
            let z: f64 = StandardNormal.sample(&mut rng);
            level *= ((mu - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp();
            let close = round_dp(level, 4).max(Decimal::new(1, 4));
            prices.push(PriceBar {
                isin: asset.isin.clone(),
                date: *day,
                close,
            });
        }
    }

    let mut rng = rng_for(seed, &["profiles"]);
    let mut profiles = Vec::with_capacity(cfg.n_users);
    let mut ids = std::collections::BTreeSet::new();
    while ids.len() < cfg.n_users {
        let id: String = (0..20)
            .map(|_| char::from_digit(rng.random_range(0..16), 16).unwrap().to_ascii_uppercase())
            .collect();
        ids.insert(id);
    }
    for id in ids {
        let customer_type = *[
            CustomerType::Mass,
            CustomerType::Mass,
            CustomerType::Mass,
            CustomerType::Premium,
            CustomerType::Premium,
            CustomerType::LegalEntity,
            CustomerType::Professional,
        ]
        .choose(&mut rng)
        .unwrap();
        let risk_level = *RiskLevel::ALL.choose(&mut rng).unwrap();
        let base = *[15_000.0, 30_000.0, 80_000.0, 300_000.0].choose(&mut rng).unwrap();
        profiles.push(CustomerProfile {
            customer_id: id,
            customer_type,
            risk_level,
            investment_capacity: round_dp(base * rng.random_range(0.8..1.25), 0),
        });
    }

    let last_day = *days.last().expect("non-empty");
    let gap = Exp::new(1.0 / cfg.mean_days_between_trades).expect("positive rate");
    let mut transactions = Vec::new();
    for profile in &profiles {
        let mut rng = rng_for(seed, &["transactions", &profile.customer_id]);
        let k = rng.random_range(1..=cfg.max_assets_per_user.max(1).min(assets.len()));
        let held: Vec<&Asset> = assets.choose_multiple(&mut rng, k).collect();
        let capacity: f64 = profile
            .investment_capacity
            .to_string()
            .parse()
            .unwrap_or(10_000.0);
        let mut day = cfg.start;
        loop {
            let step = gap.sample(&mut rng).ceil().max(1.0) as i64;
            day += Duration::days(step);
            while !is_weekday(day) {
                day += Duration::days(1);
            }
            if day > last_day {
                break;
            }
            let asset = held.choose(&mut rng).expect("non-empty");
            let tx_type = if rng.random::<f64>() < cfg.buy_probability {
                TxType::Buy
            } else {
                TxType::Sell
            };
            let value = round_dp(capacity * rng.random_range(0.01..0.10), 2).max(Decimal::new(1, 2));
            transactions.push(Transaction {
                customer_id: profile.customer_id.clone(),
                isin: asset.isin.clone(),
                tx_type,
                value,
                timestamp: day,
            });
        }
    }
    transactions.sort_by(|a, b| {
        (a.timestamp, &a.customer_id, &a.isin).cmp(&(b.timestamp, &b.customer_id, &b.isin))
    });

    Dataset::new(transactions, prices, assets, profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::date;

    #[test]
    fn invalid_ranges() {
        assert!(matches!(
            generate_synthetic(1, 1, 1, date(2020, 1, 1), date(2020, 1, 1)),
            Err(DataError::InvalidRange(_))
        ));
        assert!(generate_synthetic(1, 0, 1, date(2020, 1, 1), date(2020, 2, 1)).is_err());
    }

    #[test]
    fn prices_positive_and_in_range() {
        let ds = generate_synthetic(3, 5, 4, date(2018, 1, 2), date(2019, 1, 2)).unwrap();
        assert!(ds.prices().iter().all(|p| p.close > Decimal::ZERO));
        assert!(ds
            .prices()
            .iter()
            .all(|p| p.date >= date(2018, 1, 2) && p.date <= date(2019, 1, 2)));
        assert!(ds
            .transactions()
            .iter()
            .all(|t| t.timestamp >= date(2018, 1, 2) && t.timestamp <= date(2019, 1, 2)));
    }

    #[test]
    fn flat_walk_without_volatility() {
        let cfg = SynthConfig {
            n_users: 2,
            n_assets: 2,
            start: date(2020, 1, 1),
            end: date(2020, 3, 1),
            drift: 0.0,
            volatility: 0.0,
            ..SynthConfig::default()
        };
        let ds = generate_with(9, &cfg).unwrap();
        for a in ds.assets() {
            let bars = ds.prices_for(&a.isin);
            assert!(bars.windows(2).all(|w| w[0].close == w[1].close));
        }
    }
}
