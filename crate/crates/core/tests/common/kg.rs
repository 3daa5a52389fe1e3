//! Knowledge-graph fixtures and the joint-cap removal oracle.

use std::collections::{HashMap, HashSet};

use chrono::{Duration, NaiveDate};
use finalign::kg::{cap_triples, cap_triples_report, GraphKind, Object, Predicate};
use finalign::{KnowledgeGraph, Triple};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

use super::*;

pub fn t(s: &str, p: Predicate, o: Object) -> Triple {
    Triple::new(s, p, o).unwrap()
}

pub fn s(x: &str) -> Object {
    Object::Str(x.into())
}

pub fn num(x: &str) -> Object {
    Object::decimal(dec(x))
}

/// The five triples of the transaction figure.
pub fn trade_triples() -> Vec<Triple> {
    vec![
        t("Transaction_1", Predicate::Type, Object::Iri("SellTransaction".into())),
        t("Transaction_1", Predicate::TransactionValue, num("11000")),
        t("Transaction_1", Predicate::TransactionTimestamp, Object::Date(d(2020, 3, 27))),
        t("Transaction_1", Predicate::InvolvesSecurity, s(TRADE_ISIN)),
        t("Transaction_1", Predicate::HasParticipant, s(TRADE_CUSTOMER)),
    ]
}

/// The ten triples of the market figure.
pub fn series_triples() -> Vec<Triple> {
    let summary = "TenWeekPriceSummary_1";
    vec![
        t("Asset_1", Predicate::Identifier, s(SERIES_ISIN)),
        t("Asset_1", Predicate::Category, s("Stock")),
        t("Asset_1", Predicate::Sector, s("Industrials")),
        t("Asset_1", Predicate::Industry, s("Airlines")),
        t(summary, Predicate::PriceOf, Object::Iri("Asset_1".into())),
        t(summary, Predicate::PeriodEndPrice, num("8.54")),
        t(summary, Predicate::PeriodAveragePrice, num("9.1679792")),
        t(summary, Predicate::PeriodHighPrice, num("9.5")),
        t(summary, Predicate::PeriodLowPrice, num("8.54")),
        t(summary, Predicate::PeriodEndDate, Object::Date(d(2018, 5, 27))),
    ]
}

pub struct Fuzzed {
    pub pkg: KnowledgeGraph,
    pub mkg: KnowledgeGraph,
}

pub fn fuzz_pair(rng: &mut ChaCha8Rng) -> Fuzzed {
    let base = d(2018, 1, 1);
    let n_assets = rng.random_range(0..40);
    let mut pkg = KnowledgeGraph::new(GraphKind::Pkg);
    for i in 0..rng.random_range(0..1300) {
        let id = format!("Transaction_{}", i + 1);
        let isin = format!("ISIN{}", rng.random_range(0..n_assets.max(1) + 5));
        pkg.triples.extend([
            t(&id, Predicate::Type, Object::Iri("BuyTransaction".into())),
            t(&id, Predicate::TransactionValue, Object::decimal(Decimal::new(rng.random_range(1..100_000), 2))),
            t(&id, Predicate::TransactionTimestamp, Object::Date(base + Duration::days(rng.random_range(0..900)))),
            t(&id, Predicate::InvolvesSecurity, s(&isin)),
            t(&id, Predicate::HasParticipant, s("C")),
        ]);
    }
    let mut mkg = KnowledgeGraph::new(GraphKind::Mkg);
    let mut summary_no = 0;
    for a in 0..n_assets {
        let asset_id = format!("Asset_{}", a + 1);
        mkg.triples.extend([
            t(&asset_id, Predicate::Identifier, s(&format!("ISIN{a}"))),
            t(&asset_id, Predicate::Category, s("Stock")),
            t(&asset_id, Predicate::Sector, s("Energy")),
            t(&asset_id, Predicate::Industry, s("Oil")),
        ]);
        for _ in 0..rng.random_range(0..30) {
            summary_no += 1;
            let id = format!("TenWeekPriceSummary_{summary_no}");
            let price = Object::decimal(Decimal::new(rng.random_range(1..10_000), 2));
            mkg.triples.extend([
                t(&id, Predicate::PriceOf, Object::Iri(asset_id.clone())),
                t(&id, Predicate::PeriodEndPrice, price.clone()),
                t(&id, Predicate::PeriodAveragePrice, price.clone()),
                t(&id, Predicate::PeriodHighPrice, price.clone()),
                t(&id, Predicate::PeriodLowPrice, price),
                t(&id, Predicate::PeriodEndDate, Object::Date(base + Duration::days(rng.random_range(0..900)))),
            ]);
        }
    }
    Fuzzed { pkg, mkg }
}

/// Subjects with their triple count, earliest date for `date_pred`, and
/// first-seen position.
fn entity_table(kg: &KnowledgeGraph, date_pred: Predicate) -> Vec<(String, usize, Option<NaiveDate>)> {
    let mut order: Vec<String> = Vec::new();
    let mut info: HashMap<String, (usize, Option<NaiveDate>)> = HashMap::new();
    for tr in &kg.triples {
        let e = info.entry(tr.subject.clone()).or_insert_with(|| {
            order.push(tr.subject.clone());
            (0, None)
        });
        e.0 += 1;
        if tr.predicate == date_pred {
            let day = tr.object.as_date().unwrap();
            e.1 = Some(e.1.map_or(day, |x: NaiveDate| x.min(day)));
        }
    }
    order.into_iter().map(|s| { let (n, dt) = info[&s]; (s, n, dt) }).collect()
}

/// Expected removal sequence: PKG entities by (date, position), then
/// summaries by (date, position), then unpinned assets in graph order, each
/// taken only while the pair is over `cap`.
pub fn expected_removals(pkg: &KnowledgeGraph, mkg: &KnowledgeGraph, cap: usize) -> Vec<String> {
    let mut total = pkg.len() + mkg.len();
    let mut out = Vec::new();
    let mut pkg_e: Vec<(usize, (String, usize, Option<NaiveDate>))> =
        entity_table(pkg, Predicate::TransactionTimestamp).into_iter().enumerate().collect();
    pkg_e.sort_by(|a, b| (a.1 .2, a.0).cmp(&(b.1 .2, b.0)));
    for (_, (subject, n, _)) in &pkg_e {
        if total <= cap {
            break;
        }
        total -= n;
        out.push(subject.clone());
    }
    let summary_subjects: HashSet<&str> = mkg
        .triples
        .iter()
        .filter(|x| x.predicate == Predicate::PriceOf)
        .map(|x| x.subject.as_str())
        .collect();
    let all = entity_table(mkg, Predicate::PeriodEndDate);
    let mut summaries: Vec<(usize, &(String, usize, Option<NaiveDate>))> =
        all.iter().filter(|e| summary_subjects.contains(e.0.as_str())).enumerate().collect();
    summaries.sort_by(|a, b| (a.1 .2, a.0).cmp(&(b.1 .2, b.0)));
    for (_, (subject, n, _)) in &summaries {
        if total <= cap {
            break;
        }
        total -= n;
        out.push(subject.clone());
    }
    let gone: HashSet<&String> = out.iter().collect();
    let live_refs: HashSet<String> = pkg
        .triples
        .iter()
        .filter(|x| x.predicate == Predicate::InvolvesSecurity && !gone.contains(&x.subject))
        .map(|x| x.object.to_string())
        .collect();
    let live_summarised: HashSet<String> = mkg
        .triples
        .iter()
        .filter(|x| x.predicate == Predicate::PriceOf && !gone.contains(&x.subject))
        .map(|x| x.object.to_string())
        .collect();
    let mut extra = Vec::new();
    for (subject, n, _) in all.iter().filter(|e| !summary_subjects.contains(e.0.as_str())) {
        if total <= cap {
            break;
        }
        let isin = mkg
            .triples
            .iter()
            .find(|x| &x.subject == subject && x.predicate == Predicate::Identifier)
            .map(|x| x.object.to_string());
        if live_summarised.contains(subject) || isin.is_some_and(|i| live_refs.contains(&i)) {
            continue;
        }
        total -= n;
        extra.push(subject.clone());
    }
    out.extend(extra);
    out
}

pub fn check_cap(pkg: &KnowledgeGraph, mkg: &KnowledgeGraph, cap: usize) {
    let out = cap_triples_report(pkg, mkg, cap);
    assert!(out.pkg.len() + out.mkg.len() <= cap, "cap {cap} exceeded");
    // Subset, in order, of whole entities.
    let removed: HashSet<&str> = out.removed.iter().map(String::as_str).collect();
    let expect_pkg: Vec<&Triple> = pkg.triples.iter().filter(|x| !removed.contains(x.subject.as_str())).collect();
    let expect_mkg: Vec<&Triple> = mkg.triples.iter().filter(|x| !removed.contains(x.subject.as_str())).collect();
    assert_eq!(out.pkg.triples.iter().collect::<Vec<_>>(), expect_pkg, "pkg is not the whole-entity complement");
    assert_eq!(out.mkg.triples.iter().collect::<Vec<_>>(), expect_mkg, "mkg is not the whole-entity complement");
    assert_eq!(out.removed, expected_removals(pkg, mkg, cap));
    if pkg.len() + mkg.len() <= cap {
        assert!(out.removed.is_empty());
    }
    assert_eq!(cap_triples(pkg, mkg, cap), (out.pkg.clone(), out.mkg.clone()), "deterministic");
}

