//! Transaction, price, asset and customer data.
//!
//! A [`Dataset`] is validated once at construction and immutable afterwards.
//! Prices are kept sorted by `(isin, date)`, assets by ISIN and profiles by
//! customer id, so per-asset price lookups are a binary search.

mod csv_io;
mod synth;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{load_dataset, save_dataset, DatasetPaths};
pub use synth::{generate_synthetic, generate_with, SynthConfig};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {reason}")]
    MalformedRow {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("dangling {kind} reference: {id}")]
    DanglingReference { kind: RefKind, id: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefKind {
    Asset,
    Customer,
}

impl fmt::Display for RefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefKind::Asset => "asset",
            RefKind::Customer => "customer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxType {
    Buy,
    Sell,
}

impl TxType {
    pub fn as_str(self) -> &'static str {
        match self {
            TxType::Buy => "Buy",
            TxType::Sell => "Sell",
        }
    }
}

impl FromStr for TxType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Buy" | "buy" | "BUY" => Ok(TxType::Buy),
            "Sell" | "sell" | "SELL" => Ok(TxType::Sell),
            other => Err(format!("unknown transaction type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub customer_id: String,
    pub isin: String,
    pub tx_type: TxType,
    pub value: Decimal,
    pub timestamp: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceBar {
    pub isin: String,
    pub date: NaiveDate,
    pub close: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub isin: String,
    pub category: String,
    pub sector: String,
    pub industry: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CustomerType {
    Mass,
    Premium,
    LegalEntity,
    Professional,
}

impl CustomerType {
    pub const ALL: [CustomerType; 4] = [
        CustomerType::Mass,
        CustomerType::Premium,
        CustomerType::LegalEntity,
        CustomerType::Professional,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CustomerType::Mass => "Mass",
            CustomerType::Premium => "Premium",
            CustomerType::LegalEntity => "Legal Entity",
            CustomerType::Professional => "Professional",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for CustomerType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Mass" => Ok(CustomerType::Mass),
            "Premium" => Ok(CustomerType::Premium),
            "Legal Entity" | "LegalEntity" => Ok(CustomerType::LegalEntity),
            "Professional" => Ok(CustomerType::Professional),
            other => Err(format!("unknown customer type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskLevel {
    Conservative,
    Moderate,
    Aggressive,
}

impl RiskLevel {
    pub const ALL: [RiskLevel; 3] = [
        RiskLevel::Conservative,
        RiskLevel::Moderate,
        RiskLevel::Aggressive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskLevel::Conservative => "Conservative",
            RiskLevel::Moderate => "Moderate",
            RiskLevel::Aggressive => "Aggressive",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for RiskLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Conservative" => Ok(RiskLevel::Conservative),
            "Moderate" => Ok(RiskLevel::Moderate),
            "Aggressive" => Ok(RiskLevel::Aggressive),
            other => Err(format!("unknown risk level {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomerProfile {
    pub customer_id: String,
    pub customer_type: CustomerType,
    pub risk_level: RiskLevel,
    pub investment_capacity: Decimal,
}

/// A validated, immutable collection of the four tables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    transactions: Vec<Transaction>,
    prices: Vec<PriceBar>,
    assets: Vec<Asset>,
    profiles: Vec<CustomerProfile>,
}

impl Dataset {
    /// Validate and canonicalise. Transactions keep their input order.
    pub fn new(
        transactions: Vec<Transaction>,
        mut prices: Vec<PriceBar>,
        mut assets: Vec<Asset>,
        mut profiles: Vec<CustomerProfile>,
    ) -> Result<Self, DataError> {
        for (i, t) in transactions.iter().enumerate() {
            check_transaction(t).map_err(|r| DataError::Invalid(format!("transaction {i}: {r}")))?;
        }
        for (i, p) in prices.iter().enumerate() {
            check_price(p).map_err(|r| DataError::Invalid(format!("price {i}: {r}")))?;
        }
        for (i, a) in assets.iter().enumerate() {
            check_asset(a).map_err(|r| DataError::Invalid(format!("asset {i}: {r}")))?;
        }
        for (i, p) in profiles.iter().enumerate() {
            check_profile(p).map_err(|r| DataError::Invalid(format!("profile {i}: {r}")))?;
        }

        prices.sort_by(|a, b| (&a.isin, a.date).cmp(&(&b.isin, b.date)));
        if let Some(w) = prices
            .windows(2)
            .find(|w| w[0].isin == w[1].isin && w[0].date == w[1].date)
        {
            return Err(DataError::Invalid(format!(
                "duplicate price bar for {} on {}",
                w[0].isin, w[0].date
            )));
        }
        assets.sort_by(|a, b| a.isin.cmp(&b.isin));
        if let Some(w) = assets.windows(2).find(|w| w[0].isin == w[1].isin) {
            return Err(DataError::Invalid(format!("duplicate asset {}", w[0].isin)));
        }
        profiles.sort_by(|a, b| a.customer_id.cmp(&b.customer_id));
        if let Some(w) = profiles
            .windows(2)
            .find(|w| w[0].customer_id == w[1].customer_id)
        {
            return Err(DataError::Invalid(format!(
                "duplicate customer {}",
                w[0].customer_id
            )));
        }

        let ds = Self {
            transactions,
            prices,
            assets,
            profiles,
        };
        ds.check_references()?;
        if let Some((lo, hi)) = ds.date_range() {
            if let Some(t) = ds
                .transactions
                .iter()
                .find(|t| t.timestamp < lo || t.timestamp > hi)
            {
                return Err(DataError::Invalid(format!(
                    "transaction on {} outside dataset range {lo}..{hi}",
                    t.timestamp
                )));
            }
        }
        Ok(ds)
    }

    fn check_references(&self) -> Result<(), DataError> {
        let isins: HashSet<&str> = self.assets.iter().map(|a| a.isin.as_str()).collect();
        let customers: HashSet<&str> = self
            .profiles
            .iter()
            .map(|p| p.customer_id.as_str())
            .collect();
        for t in &self.transactions {
            if !isins.contains(t.isin.as_str()) {
                return Err(DataError::DanglingReference {
                    kind: RefKind::Asset,
                    id: t.isin.clone(),
                });
            }
            if !customers.contains(t.customer_id.as_str()) {
                return Err(DataError::DanglingReference {
                    kind: RefKind::Customer,
                    id: t.customer_id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn prices(&self) -> &[PriceBar] {
        &self.prices
    }

    pub fn assets(&self) -> &[Asset] {
        &self.assets
    }

    pub fn profiles(&self) -> &[CustomerProfile] {
        &self.profiles
    }

    pub fn asset(&self, isin: &str) -> Option<&Asset> {
        self.assets
            .binary_search_by(|a| a.isin.as_str().cmp(isin))
            .ok()
            .map(|i| &self.assets[i])
    }

    pub fn profile(&self, customer_id: &str) -> Option<&CustomerProfile> {
        self.profiles
            .binary_search_by(|p| p.customer_id.as_str().cmp(customer_id))
            .ok()
            .map(|i| &self.profiles[i])
    }

    /// Bars of one asset, sorted by date.
    pub fn prices_for(&self, isin: &str) -> &[PriceBar] {
        let lo = self.prices.partition_point(|p| p.isin.as_str() < isin);
        let hi = self.prices.partition_point(|p| p.isin.as_str() <= isin);
        &self.prices[lo..hi]
    }

    /// Earliest and latest price date.
    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let lo = self.prices.iter().map(|p| p.date).min()?;
        let hi = self.prices.iter().map(|p| p.date).max()?;
        Some((lo, hi))
    }

    pub fn customer_ids(&self) -> impl Iterator<Item = &str> {
        self.profiles.iter().map(|p| p.customer_id.as_str())
    }

    pub fn isins(&self) -> BTreeSet<String> {
        self.assets.iter().map(|a| a.isin.clone()).collect()
    }

    pub fn transactions_of<'a>(&'a self, customer_id: &'a str) -> impl Iterator<Item = &'a Transaction> + 'a {
        self.transactions
            .iter()
            .filter(move |t| t.customer_id == customer_id)
    }
}

pub(crate) fn check_transaction(t: &Transaction) -> Result<(), String> {
    if t.customer_id.trim().is_empty() {
        return Err("empty customer id".into());
    }
    if t.isin.trim().is_empty() {
        return Err("empty isin".into());
    }
    if t.value <= Decimal::ZERO {
        return Err(format!("transaction value must be positive, got {}", t.value));
    }
    Ok(())
}

pub(crate) fn check_price(p: &PriceBar) -> Result<(), String> {
    if p.isin.trim().is_empty() {
        return Err("empty isin".into());
    }
    if p.close <= Decimal::ZERO {
        return Err(format!("close must be positive, got {}", p.close));
    }
    Ok(())
}

pub(crate) fn check_asset(a: &Asset) -> Result<(), String> {
    if a.isin.trim().is_empty() {
        return Err("empty isin".into());
    }
    Ok(())
}

pub(crate) fn check_profile(p: &CustomerProfile) -> Result<(), String> {
    if p.customer_id.trim().is_empty() {
        return Err("empty customer id".into());
    }
    if p.investment_capacity < Decimal::ZERO {
        return Err(format!(
            "investment capacity must be non-negative, got {}",
            p.investment_capacity
        ));
    }
    Ok(())
}

/// Parse `YYYY-M-D`, tolerating missing zero padding and a trailing time part.
pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    let s = s.trim();
    let day = s.split([' ', 'T']).next().unwrap_or(s);
    let mut parts = day.split('-');
    let (Some(y), Some(m), Some(d), None) = (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(format!("bad date {s:?}"));
    };
    let parse = |x: &str| x.parse::<u32>().map_err(|_| format!("bad date {s:?}"));
    let year = y.parse::<i32>().map_err(|_| format!("bad date {s:?}"))?;
    NaiveDate::from_ymd_opt(year, parse(m)?, parse(d)?).ok_or_else(|| format!("bad date {s:?}"))
}
