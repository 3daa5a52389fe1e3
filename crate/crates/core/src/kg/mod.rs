//! Personal and Market Knowledge Graphs.
//!
//! A PKG holds one customer's transactions before a cutoff date; an MKG holds
//! asset metadata plus ten-week price summaries that end before the cutoff.
//! Both are plain ordered triple lists over a fixed vocabulary, serialised
//! to JSON-LD by [`to_jsonld`].

mod build;
mod cap;
mod jsonld;
mod summary;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build_mkg, build_mkg_from, build_pkg, select_mkg_assets, MarketSummaries};
pub use cap::{cap_triples, cap_triples_report, CapOutcome, DEFAULT_TRIPLE_CAP};
pub use jsonld::{from_jsonld, to_jsonld, VOCAB_IRI};
pub use summary::{summarize_prices, summarize_prices_with, TenWeekSummary, SUMMARY_WINDOW_DAYS};

#[derive(Debug, Error)]
pub enum KgError {
    #[error("unknown customer {0}")]
    UnknownCustomer(String),
    #[error("predicate {predicate} expects a {expected:?} object, got {got:?}")]
    RangeMismatch {
        predicate: Predicate,
        expected: ObjectKind,
        got: ObjectKind,
    },
    #[error("unknown predicate {0:?}")]
    UnknownPredicate(String),
    #[error("malformed JSON-LD: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraphKind {
    Pkg,
    Mkg,
}

/// The fixed vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Predicate {
    TransactionValue,
    TransactionTimestamp,
    InvolvesSecurity,
    HasParticipant,
    Type,
    PriceOf,
    PeriodEndPrice,
    PeriodAveragePrice,
    PeriodHighPrice,
    PeriodLowPrice,
    PeriodEndDate,
    Identifier,
    Category,
    Sector,
    Industry,
}

/// What kind of object a predicate takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    /// Node or class reference.
    Iri,
    Str,
    Decimal,
    Date,
}

impl Predicate {
    pub const ALL: [Predicate; 15] = [
        Predicate::TransactionValue,
        Predicate::TransactionTimestamp,
        Predicate::InvolvesSecurity,
        Predicate::HasParticipant,
        Predicate::Type,
        Predicate::PriceOf,
        Predicate::PeriodEndPrice,
        Predicate::PeriodAveragePrice,
        Predicate::PeriodHighPrice,
        Predicate::PeriodLowPrice,
        Predicate::PeriodEndDate,
        Predicate::Identifier,
        Predicate::Category,
        Predicate::Sector,
        Predicate::Industry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Predicate::TransactionValue => "transactionValue",
            Predicate::TransactionTimestamp => "transactionTimestamp",
            Predicate::InvolvesSecurity => "involvesSecurity",
            Predicate::HasParticipant => "hasParticipant",
            Predicate::Type => "type",
            Predicate::PriceOf => "priceOf",
            Predicate::PeriodEndPrice => "periodEndPrice",
            Predicate::PeriodAveragePrice => "periodAveragePrice",
            Predicate::PeriodHighPrice => "periodHighPrice",
            Predicate::PeriodLowPrice => "periodLowPrice",
            Predicate::PeriodEndDate => "periodEndDate",
            Predicate::Identifier => "identifier",
            Predicate::Category => "category",
            Predicate::Sector => "sector",
            Predicate::Industry => "industry",
        }
    }

    pub fn range(self) -> ObjectKind {
        match self {
            Predicate::Type | Predicate::PriceOf => ObjectKind::Iri,
            Predicate::TransactionValue
            | Predicate::PeriodEndPrice
            | Predicate::PeriodAveragePrice
            | Predicate::PeriodHighPrice
            | Predicate::PeriodLowPrice => ObjectKind::Decimal,
            Predicate::TransactionTimestamp | Predicate::PeriodEndDate => ObjectKind::Date,
            Predicate::InvolvesSecurity
            | Predicate::HasParticipant
            | Predicate::Identifier
            | Predicate::Category
            | Predicate::Sector
            | Predicate::Industry => ObjectKind::Str,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Predicate {
    type Err = KgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Predicate::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| KgError::UnknownPredicate(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Object {
    Iri(String),
    Str(String),
    Decimal(Decimal),
    Date(NaiveDate),
}

impl Object {
    pub fn kind(&self) -> ObjectKind {
        match self {
            Object::Iri(_) => ObjectKind::Iri,
            Object::Str(_) => ObjectKind::Str,
            Object::Decimal(_) => ObjectKind::Decimal,
            Object::Date(_) => ObjectKind::Date,
        }
    }

    /// A decimal literal with trailing zeros stripped.
    pub fn decimal(d: Decimal) -> Self {
        Object::Decimal(d.normalize())
    }

    pub fn as_date(&self) -> Option<NaiveDate> {
        match self {
            Object::Date(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Object::Iri(s) | Object::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Object::Iri(s) | Object::Str(s) => f.write_str(s),
            Object::Decimal(d) => write!(f, "{d}"),
            Object::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: Predicate,
    pub object: Object,
}

impl Triple {
    /// Build a triple, checking the object against the predicate's range.
    pub fn new(subject: impl Into<String>, predicate: Predicate, object: Object) -> Result<Self, KgError> {
        if object.kind() != predicate.range() {
            return Err(KgError::RangeMismatch {
                predicate,
                expected: predicate.range(),
                got: object.kind(),
            });
        }
        Ok(Self {
            subject: subject.into(),
            predicate,
            object,
        })
    }

    // Builders only emit range-correct objects.
    pub(crate) fn checked(subject: &str, predicate: Predicate, object: Object) -> Self {
        Self::new(subject, predicate, object).expect("builder emits range-correct triples")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub kind: GraphKind,
    pub triples: Vec<Triple>,
}

impl KnowledgeGraph {
    pub fn new(kind: GraphKind) -> Self {
        Self {
            kind,
            triples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Subjects in first-seen order.
    pub fn subjects(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.triples
            .iter()
            .map(|t| t.subject.as_str())
            .filter(|s| seen.insert(*s))
            .collect()
    }

    /// Every date literal in the graph.
    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.triples.iter().filter_map(|t| t.object.as_date())
    }
}
