//! Joint triple budget for a PKG/MKG pair.
//!
//! Pruning removes whole entities (all triples sharing a subject) in this
//! order until the pair fits:
//!
//! 1. PKG entities, oldest `transactionTimestamp` first;
//! 2. MKG summaries (subjects with `priceOf`), oldest `periodEndDate` first;
//! 3. MKG assets with no remaining summary and no remaining PKG transaction
//!    on their ISIN, in graph order.
//!
//! Ties keep graph order; entities without a date sort first.

use std::collections::HashSet;

use chrono::NaiveDate;

use super::{KnowledgeGraph, Object, Predicate};

pub const DEFAULT_TRIPLE_CAP: usize = 5000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapOutcome {
    pub pkg: KnowledgeGraph,
    pub mkg: KnowledgeGraph,
    /// Subjects removed, in removal order. PKG subjects come first.
    pub removed: Vec<String>,
}

struct Entity<'a> {
    subject: &'a str,
    triples: usize,
    date: Option<NaiveDate>,
    price_of: Option<&'a str>,
    identifier: Option<&'a str>,
}

fn entities(kg: &KnowledgeGraph, date_predicate: Predicate) -> Vec<Entity<'_>> {
    let mut out: Vec<Entity<'_>> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for t in &kg.triples {
        let i = *index.entry(t.subject.as_str()).or_insert_with(|| {
            out.push(Entity {
                subject: &t.subject,
                triples: 0,
                date: None,
                price_of: None,
                identifier: None,
            });
            out.len() - 1
        });
        let e = &mut out[i];
        e.triples += 1;
        match (&t.predicate, &t.object) {
            (p, Object::Date(d)) if *p == date_predicate => {
                e.date = Some(e.date.map_or(*d, |x| x.min(*d)));
            }
            (Predicate::PriceOf, Object::Iri(a)) => e.price_of = Some(a),
            (Predicate::Identifier, Object::Str(s)) => e.identifier = Some(s),
            _ => {}
        }
    }
    out
}

fn retain(kg: &KnowledgeGraph, removed: &HashSet<String>) -> KnowledgeGraph {
    KnowledgeGraph {
        kind: kg.kind,
        triples: kg
            .triples
            .iter()
            .filter(|t| !removed.contains(&t.subject))
            .cloned()
            .collect(),
    }
}

/// Prune `pkg` and `mkg` so their combined size is at most `cap`.
pub fn cap_triples(pkg: &KnowledgeGraph, mkg: &KnowledgeGraph, cap: usize) -> (KnowledgeGraph, KnowledgeGraph) {
    let out = cap_triples_report(pkg, mkg, cap);
    (out.pkg, out.mkg)
}

/// [`cap_triples`] that also reports which subjects were removed.
pub fn cap_triples_report(pkg: &KnowledgeGraph, mkg: &KnowledgeGraph, cap: usize) -> CapOutcome {
    let mut total = pkg.len() + mkg.len();
    if total <= cap {
        return CapOutcome {
            pkg: pkg.clone(),
            mkg: mkg.clone(),
            removed: Vec::new(),
        };
    }
    let mut removed: Vec<String> = Vec::new();

    let mut pkg_entities = entities(pkg, Predicate::TransactionTimestamp);
    pkg_entities.sort_by_key(|e| e.date); // stable: graph order breaks ties
    let mut pkg_alive = pkg_entities.len();
    for e in &pkg_entities {
        if total <= cap {
            break;
        }
        total -= e.triples;
        pkg_alive -= 1;
        removed.push(e.subject.to_string());
    }
    // Only the survivors reference assets.
    let referenced: HashSet<&str> = pkg_entities[pkg_entities.len() - pkg_alive..]
        .iter()
        .flat_map(|e| {
            pkg.triples
                .iter()
                .filter(move |t| t.subject == e.subject && t.predicate == Predicate::InvolvesSecurity)
                .filter_map(|t| t.object.as_text())
        })
        .collect();

    let mkg_entities = entities(mkg, Predicate::PeriodEndDate);
    let mut summaries: Vec<&Entity<'_>> = mkg_entities.iter().filter(|e| e.price_of.is_some()).collect();
    summaries.sort_by_key(|e| e.date);
    let mut gone: HashSet<&str> = HashSet::new();
    for e in &summaries {
        if total <= cap {
            break;
        }
        total -= e.triples;
        gone.insert(e.subject);
        removed.push(e.subject.to_string());
    }

    if total > cap {
        let still_summarised: HashSet<&str> = summaries
            .iter()
            .filter(|e| !gone.contains(e.subject))
            .filter_map(|e| e.price_of)
            .collect();
        for e in mkg_entities.iter().filter(|e| e.price_of.is_none()) {
            if total <= cap {
                break;
            }
            let pinned = still_summarised.contains(e.subject)
                || e.identifier.is_some_and(|isin| referenced.contains(isin));
            if pinned {
                continue;
            }
            total -= e.triples;
            removed.push(e.subject.to_string());
        }
    }

    let removed_set: HashSet<String> = removed.iter().cloned().collect();
    CapOutcome {
        pkg: retain(pkg, &removed_set),
        mkg: retain(mkg, &removed_set),
        removed,
    }
}
