mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use common::*;
use finalign::alignment::MarketReturns;
use finalign::data::{
    generate_synthetic, load_dataset, save_dataset, CustomerType, DataError, DatasetPaths, RefKind, RiskLevel, TxType,
};
use finalign::{Asset, CustomerProfile, Dataset, PriceBar, Transaction};
use proptest::prelude::*;
use rust_decimal::Decimal;

const TX_HEADER: &str = "customerID,ISIN,transactionType,totalValue,timestamp";
const PRICE_HEADER: &str = "ISIN,timestamp,closePrice";
const ASSET_HEADER: &str = "ISIN,assetCategory,sector,industry";
const PROFILE_HEADER: &str = "customerID,customerType,riskLevel,investmentCapacity";

struct Files {
    transactions: Vec<String>,
    prices: Vec<String>,
    assets: Vec<String>,
    profiles: Vec<String>,
}

impl Files {
    fn valid() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        Self {
            transactions: s(&[
                TX_HEADER,
                "00017496858921195E5A,GRS434003000,Sell,11000,2020-3-27",
                "00017496858921195E5A,GRS434003000,Buy,2500.50,2020-02-03",
            ]),
            prices: s(&[
                PRICE_HEADER,
                "GRS434003000,2020-01-02,4.1",
                "GRS434003000,2020-12-30,5.2",
                "GRS495003006,2020-01-02,9.5",
            ]),
            assets: s(&[
                ASSET_HEADER,
                "GRS434003000,Stock,Utilities,Water Utilities",
                "GRS495003006,Stock,Industrials,Airlines",
            ]),
            profiles: s(&[PROFILE_HEADER, "00017496858921195E5A,Mass,Moderate,50000"]),
        }
    }

    fn write(&self, dir: &Path) -> DatasetPaths {
        let paths = DatasetPaths::in_dir(dir);
        let join = |rows: &[String]| rows.join("\n") + "\n";
        fs::write(&paths.transactions, join(&self.transactions)).unwrap();
        fs::write(&paths.prices, join(&self.prices)).unwrap();
        fs::write(&paths.assets, join(&self.assets)).unwrap();
        fs::write(&paths.profiles, join(&self.profiles)).unwrap();
        paths
    }

    fn table(&mut self, name: &str) -> &mut Vec<String> {
        match name {
            "transactions" => &mut self.transactions,
            "prices" => &mut self.prices,
            "assets" => &mut self.assets,
            "profiles" => &mut self.profiles,
            _ => unreachable!(),
        }
    }
}

fn load(files: &Files) -> Result<Dataset, DataError> {
    let dir = tempfile::tempdir().unwrap();
    load_dataset(&files.write(dir.path()))
}

#[test]
fn figure_row_loads_with_exact_fields() {
    let ds = load(&Files::valid()).unwrap();
    let sells: Vec<&Transaction> = ds.transactions().iter().filter(|t| t.tx_type == TxType::Sell).collect();
    assert_eq!(sells.len(), 1);
    assert_eq!(*sells[0], trade_transaction());
    assert_eq!(sells[0].value.to_string(), "11000");
}

#[test]
fn header_only_transactions() {
    let mut files = Files::valid();
    files.transactions.truncate(1);
    let ds = load(&files).unwrap();
    assert!(ds.transactions().is_empty());
    assert_eq!(ds.assets().len(), 2);
}

#[test]
fn dangling_asset_reference() {
    let mut files = Files::valid();
    files.transactions[1] = "00017496858921195E5A,GRS000000000,Sell,11000,2020-03-27".into();
    match load(&files) {
        Err(DataError::DanglingReference { kind: RefKind::Asset, id }) => assert_eq!(id, "GRS000000000"),
        other => panic!("expected a dangling asset, got {other:?}"),
    }
}

#[test]
fn missing_file_and_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let paths = Files::valid().write(dir.path());
    fs::remove_file(&paths.assets).unwrap();
    assert!(matches!(load_dataset(&paths), Err(DataError::MissingFile(_))));

    let mut files = Files::valid();
    files.prices[0] = "ISIN,timestamp,price".into();
    assert!(matches!(load(&files), Err(DataError::MalformedRow { line: 1, .. })));
}

#[test]
fn extra_columns_are_ignored() {
    let mut files = Files::valid();
    for (i, row) in files.assets.iter_mut().enumerate() {
        row.push_str(if i == 0 { ",rating" } else { ",AA" });
    }
    assert_eq!(load(&files).unwrap(), load(&Files::valid()).unwrap());
}

/// Each mutation edits one cell of the valid fixture. Invalid edits must be
/// rejected with the edited line; valid edits must load.
#[test]
fn validation_rejects_exactly_the_violating_rows() {
    let invalid: &[(&str, usize, &str)] = &[
        ("transactions", 1, "00017496858921195E5A,GRS434003000,Sell,-11000,2020-03-27"),
        ("transactions", 1, "00017496858921195E5A,GRS434003000,Sell,0,2020-03-27"),
        ("transactions", 2, "00017496858921195E5A,GRS434003000,Hold,2500.50,2020-02-03"),
        ("transactions", 2, "00017496858921195E5A,GRS434003000,Buy,1e3,2020-02-03"),
        ("transactions", 2, "00017496858921195E5A,GRS434003000,Buy,2500.50,2020-02-30"),
        ("transactions", 2, "00017496858921195E5A,GRS434003000,Buy,2500.50,2021-06-01"),
        ("transactions", 1, ",GRS434003000,Sell,11000,2020-03-27"),
        ("prices", 2, "GRS434003000,2020-12-30,0"),
        ("prices", 3, "GRS495003006,2020-01-02,-9.5"),
        ("prices", 3, "GRS434003000,2020-01-02,9.5"),
        ("prices", 1, "GRS434003000,02/01/2020,4.1"),
        ("assets", 2, "GRS434003000,Stock,Industrials,Airlines"),
        ("assets", 2, ",Stock,Industrials,Airlines"),
        ("profiles", 1, "00017496858921195E5A,Inactive,Moderate,50000"),
        ("profiles", 1, "00017496858921195E5A,Mass,Balanced,50000"),
        ("profiles", 1, "00017496858921195E5A,Mass,Moderate,-1"),
    ];
    for (table, row, text) in invalid {
        let mut files = Files::valid();
        files.table(table)[*row] = text.to_string();
        match load(&files) {
            Err(DataError::MalformedRow { line, .. }) => {
                assert_eq!(line, *row as u64 + 1, "{table} row {row}: {text}")
            }
            other => panic!("{table} row {row} {text:?}: expected MalformedRow, got {other:?}"),
        }
    }

    let valid: &[(&str, usize, &str)] = &[
        ("transactions", 1, "00017496858921195E5A,GRS434003000,Sell,12000,2020-03-27"),
        ("transactions", 2, "00017496858921195E5A,GRS495003006,buy,0.01,2020-01-02"),
        ("transactions", 2, "00017496858921195E5A,GRS434003000,Buy,2500.50,2020-12-30 00:00:00"),
        ("prices", 3, "GRS495003006,2020-12-30,0.0001"),
        ("assets", 2, "GRS495003006,Bond,,"),
        ("profiles", 1, "00017496858921195E5A,Legal Entity,Aggressive,0"),
    ];
    for (table, row, text) in valid {
        let mut files = Files::valid();
        files.table(table)[*row] = text.to_string();
        assert!(load(&files).is_ok(), "{table} row {row}: {text:?} should load");
    }
}

fn csv_bytes(ds: &Dataset) -> BTreeMap<String, Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(ds, &DatasetPaths::in_dir(dir.path())).unwrap();
    fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn synthetic_generation_is_byte_deterministic() {
    let a = generate_synthetic(7, 1, 1, d(2018, 1, 2), d(2018, 3, 1)).unwrap();
    let b = generate_synthetic(7, 1, 1, d(2018, 1, 2), d(2018, 3, 1)).unwrap();
    assert_eq!(a, b);
    assert_eq!(csv_bytes(&a), csv_bytes(&b));
    let c = generate_synthetic(8, 1, 1, d(2018, 1, 2), d(2018, 3, 1)).unwrap();
    assert_ne!(csv_bytes(&a), csv_bytes(&c));
}

#[test]
fn synthetic_invariants() {
    let (start, end) = (d(2018, 1, 2), d(2022, 1, 2));
    let ds = generate_synthetic(7, 10, 20, start, end).unwrap();
    assert_eq!(ds.profiles().len(), 10);
    assert_eq!(ds.assets().len(), 20);
    let isins = ds.isins();
    assert!(ds.transactions().iter().all(|t| isins.contains(&t.isin)));
    assert!(ds.transactions().iter().all(|t| ds.profile(&t.customer_id).is_some()));
    assert!(ds.transactions().iter().all(|t| t.timestamp >= start && t.timestamp <= end));
    assert!(ds.prices().iter().all(|p| p.close > Decimal::ZERO && p.date >= start && p.date <= end));
    assert!(ds
        .prices()
        .windows(2)
        .all(|w| (&w[0].isin, w[0].date) < (&w[1].isin, w[1].date)));
}

/// Fraction of assets with a positive 180-day return from `date`, read
/// straight from the price CSV.
fn positive_fraction_from_csv(path: &Path, date: NaiveDate) -> f64 {
    let end = date + Duration::days(180);
    let mut reader = csv::Reader::from_path(path).unwrap();
    let mut window: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let day = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").unwrap();
        if day >= date && day <= end {
            window.entry(rec[0].to_string()).or_default().push((day, rec[2].parse().unwrap()));
        }
    }
    window.values_mut().for_each(|bars| bars.sort_by_key(|b| b.0));
    let positive = window.values().filter(|bars| bars.last().unwrap().1 > bars[0].1).count();
    positive as f64 / window.len() as f64
}

#[test]
fn positive_return_fraction_matches_csv_recomputation() {
    let ds = desk_dataset(SYNTH_SEED);
    let dir = tempfile::tempdir().unwrap();
    let paths = DatasetPaths::in_dir(dir.path());
    save_dataset(&ds, &paths).unwrap();

    let date = d(2019, 8, 1);
    let market = MarketReturns::at(&ds, date, 180);
    assert_eq!(market.covered().len(), 30);
    let library = market.profitable().len() as f64 / market.covered().len() as f64;
    let oracle = positive_fraction_from_csv(&paths.prices, date);
    assert_eq!(library, oracle);
    assert!(library > 0.0 && library < 1.0, "degenerate market: {library}");
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    let bars = prop::collection::vec((0usize..3, 0i64..900, 1i64..100_000_000, 0u32..8), 1..40);
    let profiles = prop::collection::vec((0usize..4, 0usize..3, 0i64..10_000_000_000, 0u32..3), 1..4);
    let txs = prop::collection::vec((0usize..8, 0usize..8, any::<bool>(), 1i64..1_000_000_000, 0u32..5, 0i64..900), 0..25);
    (bars, profiles, txs).prop_map(|(bars, profiles, txs)| {
        let start = d(2019, 1, 1);
        let mut by_key = BTreeMap::new();
        for (a, day, m, scale) in bars {
            by_key.insert((a, day), Decimal::new(m, scale));
        }
        let prices: Vec<PriceBar> = by_key
            .iter()
            .map(|((a, day), close)| PriceBar {
                isin: format!("ISIN{a}"),
                date: start + Duration::days(*day),
                close: *close,
            })
            .collect();
        let used: Vec<usize> = by_key.keys().map(|k| k.0).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let assets: Vec<Asset> = used
            .iter()
            .map(|a| Asset {
                isin: format!("ISIN{a}"),
                category: if a % 2 == 0 { "Stock" } else { "Bond" }.into(),
                sector: format!("Sector, \"{a}\""),
                industry: format!("Industry {a}"),
            })
            .collect();
        let profiles: Vec<CustomerProfile> = profiles
            .iter()
            .enumerate()
            .map(|(i, (t, r, cap, scale))| CustomerProfile {
                customer_id: format!("C{i:03}"),
                customer_type: CustomerType::ALL[*t],
                risk_level: RiskLevel::ALL[*r],
                investment_capacity: Decimal::new(*cap, *scale),
            })
            .collect();
        let lo = by_key.keys().map(|k| k.1).min().unwrap();
        let hi = by_key.keys().map(|k| k.1).max().unwrap();
        let transactions: Vec<Transaction> = txs
            .into_iter()
            .map(|(c, a, buy, v, scale, day)| Transaction {
                customer_id: profiles[c % profiles.len()].customer_id.clone(),
                isin: assets[a % assets.len()].isin.clone(),
                tx_type: if buy { TxType::Buy } else { TxType::Sell },
                value: Decimal::new(v, scale),
                timestamp: start + Duration::days(lo + day % (hi - lo + 1)),
            })
            .collect();
        Dataset::new(transactions, prices, assets, profiles).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_load_round_trip(ds in arb_dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let paths = DatasetPaths::in_dir(dir.path());
        save_dataset(&ds, &paths).unwrap();
        let back = load_dataset(&paths).unwrap();
        prop_assert_eq!(&back, &ds);
        for (a, b) in back.transactions().iter().zip(ds.transactions()) {
            prop_assert_eq!(a.value.scale(), b.value.scale());
        }
    }
}
