//! CSV ingestion and export.
//!
//! Column sets (header names follow the public FAR-Trans exports):
//!
//! | file | columns |
//! | ---- | ------- |
//! | transactions | `customerID,ISIN,transactionType,totalValue,timestamp` |
//! | prices | `ISIN,timestamp,closePrice` |
//! | assets | `ISIN,assetCategory,sector,industry` |
//! | profiles | `customerID,customerType,riskLevel,investmentCapacity` |
//!
//! Extra columns are ignored with a warning. Dates are written as ISO-8601
//! and decimals as plain base-10 strings.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Writer};
use rust_decimal::Decimal;

use super::{
    check_asset, check_price, check_profile, check_transaction, parse_date, Asset,
    CustomerProfile, DataError, Dataset, PriceBar, RefKind, Transaction,
};

pub const TRANSACTION_COLUMNS: [&str; 5] =
    ["customerID", "ISIN", "transactionType", "totalValue", "timestamp"];
pub const PRICE_COLUMNS: [&str; 3] = ["ISIN", "timestamp", "closePrice"];
pub const ASSET_COLUMNS: [&str; 4] = ["ISIN", "assetCategory", "sector", "industry"];
pub const PROFILE_COLUMNS: [&str; 4] =
    ["customerID", "customerType", "riskLevel", "investmentCapacity"];

/// Locations of the four tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub transactions: PathBuf,
    pub prices: PathBuf,
    pub assets: PathBuf,
    pub profiles: PathBuf,
}

impl DatasetPaths {
    /// The conventional file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            transactions: dir.join("transactions.csv"),
            prices: dir.join("close_prices.csv"),
            assets: dir.join("asset_information.csv"),
            profiles: dir.join("customer_information.csv"),
        }
    }
}

struct Table {
    file: String,
    columns: Vec<usize>,
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    fn get<'r>(&self, rec: &'r StringRecord, col: usize) -> &'r str {
        rec.get(self.columns[col]).unwrap_or("").trim()
    }

    fn malformed(&self, line: u64, reason: impl Into<String>) -> DataError {
        DataError::MalformedRow {
            file: self.file.clone(),
            line,
            reason: reason.into(),
        }
    }
}

fn read_table(path: &Path, required: &[&str]) -> Result<Table, DataError> {
    if !path.is_file() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let file = path.display().to_string();
    let mut reader = ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut columns = Vec::with_capacity(required.len());
    for name in required {
        match headers.iter().position(|h| h.trim() == *name) {
            Some(i) => columns.push(i),
            None => {
                return Err(DataError::MalformedRow {
                    file,
                    line: 1,
                    reason: format!("missing column {name:?}"),
                })
            }
        }
    }
    for extra in headers.iter().filter(|h| !required.contains(&h.trim())) {
        log::warn!("{file}: ignoring unknown column {extra:?}");
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DataError::MalformedRow {
                file: file.clone(),
                line,
                reason: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(Table {
        file,
        columns,
        rows,
    })
}

fn decimal(s: &str) -> Result<Decimal, String> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return Err(format!("not a plain decimal: {s:?}"));
    }
    s.parse::<Decimal>()
        .map_err(|_| format!("not a plain decimal: {s:?}"))
}

/// Load and validate the four tables.
///
/// Every row violating an invariant is reported with its 1-based line number;
/// the header is line 1.
pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset, DataError> {
    let tx_table = read_table(&paths.transactions, &TRANSACTION_COLUMNS)?;
    let price_table = read_table(&paths.prices, &PRICE_COLUMNS)?;
    let asset_table = read_table(&paths.assets, &ASSET_COLUMNS)?;
    let profile_table = read_table(&paths.profiles, &PROFILE_COLUMNS)?;

    let mut assets = Vec::with_capacity(asset_table.rows.len());
    let mut seen_assets = HashSet::new();
    for (line, rec) in &asset_table.rows {
        let asset = Asset {
            isin: asset_table.get(rec, 0).to_string(),
            category: asset_table.get(rec, 1).to_string(),
            sector: asset_table.get(rec, 2).to_string(),
            industry: asset_table.get(rec, 3).to_string(),
        };
        check_asset(&asset).map_err(|r| asset_table.malformed(*line, r))?;
        if !seen_assets.insert(asset.isin.clone()) {
            return Err(asset_table.malformed(*line, format!("duplicate asset {}", asset.isin)));
        }
        assets.push(asset);
    }

    let mut profiles = Vec::with_capacity(profile_table.rows.len());
    let mut seen_customers = HashSet::new();
    for (line, rec) in &profile_table.rows {
        let t = &profile_table;
        let profile = CustomerProfile {
            customer_id: t.get(rec, 0).to_string(),
            customer_type: t.get(rec, 1).parse().map_err(|r: String| t.malformed(*line, r))?,
            risk_level: t.get(rec, 2).parse().map_err(|r: String| t.malformed(*line, r))?,
            investment_capacity: decimal(t.get(rec, 3)).map_err(|r| t.malformed(*line, r))?,
        };
        check_profile(&profile).map_err(|r| t.malformed(*line, r))?;
        if !seen_customers.insert(profile.customer_id.clone()) {
            return Err(t.malformed(*line, format!("duplicate customer {}", profile.customer_id)));
        }
        profiles.push(profile);
    }

    let mut prices = Vec::with_capacity(price_table.rows.len());
    let mut seen_bars = HashSet::new();
    for (line, rec) in &price_table.rows {
        let t = &price_table;
        let bar = PriceBar {
            isin: t.get(rec, 0).to_string(),
            date: parse_date(t.get(rec, 1)).map_err(|r| t.malformed(*line, r))?,
            close: decimal(t.get(rec, 2)).map_err(|r| t.malformed(*line, r))?,
        };
        check_price(&bar).map_err(|r| t.malformed(*line, r))?;
        if !seen_bars.insert((bar.isin.clone(), bar.date)) {
            return Err(t.malformed(
                *line,
                format!("duplicate price bar for {} on {}", bar.isin, bar.date),
            ));
        }
        prices.push(bar);
    }
    let range = prices
        .iter()
        .map(|p| p.date)
        .min()
        .zip(prices.iter().map(|p| p.date).max());

    let asset_ids: HashSet<&str> = assets.iter().map(|a| a.isin.as_str()).collect();
    let customer_ids: HashMap<&str, ()> =
        profiles.iter().map(|p| (p.customer_id.as_str(), ())).collect();
    let mut transactions = Vec::with_capacity(tx_table.rows.len());
    for (line, rec) in &tx_table.rows {
        let t = &tx_table;
        let tx = Transaction {
            customer_id: t.get(rec, 0).to_string(),
            isin: t.get(rec, 1).to_string(),
            tx_type: t.get(rec, 2).parse().map_err(|r: String| t.malformed(*line, r))?,
            value: decimal(t.get(rec, 3)).map_err(|r| t.malformed(*line, r))?,
            timestamp: parse_date(t.get(rec, 4)).map_err(|r| t.malformed(*line, r))?,
        };
        check_transaction(&tx).map_err(|r| t.malformed(*line, r))?;
        if let Some((lo, hi)) = range {
            if tx.timestamp < lo || tx.timestamp > hi {
                return Err(t.malformed(
                    *line,
                    format!("timestamp {} outside dataset range {lo}..{hi}", tx.timestamp),
                ));
            }
        }
        if !asset_ids.contains(tx.isin.as_str()) {
            return Err(DataError::DanglingReference {
                kind: RefKind::Asset,
                id: tx.isin,
            });
        }
        if !customer_ids.contains_key(tx.customer_id.as_str()) {
            return Err(DataError::DanglingReference {
                kind: RefKind::Customer,
                id: tx.customer_id,
            });
        }
        transactions.push(tx);
    }

    Dataset::new(transactions, prices, assets, profiles)
}

fn writer(path: &Path) -> Result<Writer<File>, DataError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(Writer::from_path(path)?)
}

/// Write the four tables in the format [`load_dataset`] reads.
pub fn save_dataset(dataset: &Dataset, paths: &DatasetPaths) -> Result<(), DataError> {
    let mut w = writer(&paths.transactions)?;
    w.write_record(TRANSACTION_COLUMNS)?;
    for t in dataset.transactions() {
        w.write_record([
            t.customer_id.as_str(),
            t.isin.as_str(),
            t.tx_type.as_str(),
            &t.value.to_string(),
            &t.timestamp.format("%Y-%m-%d").to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&paths.prices)?;
    w.write_record(PRICE_COLUMNS)?;
    for p in dataset.prices() {
        w.write_record([
            p.isin.as_str(),
            &p.date.format("%Y-%m-%d").to_string(),
            &p.close.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&paths.assets)?;
    w.write_record(ASSET_COLUMNS)?;
    for a in dataset.assets() {
        w.write_record([&a.isin, &a.category, &a.sector, &a.industry])?;
    }
    w.flush()?;

    let mut w = writer(&paths.profiles)?;
    w.write_record(PROFILE_COLUMNS)?;
    for p in dataset.profiles() {
        w.write_record([
            p.customer_id.as_str(),
            p.customer_type.as_str(),
            p.risk_level.as_str(),
            &p.investment_capacity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
