//! Test instances, Hits@3 metrics and baseline recommenders.
//!
//! Pref@3, Prof@3 and Comb@3 are Hits@3 against the purchased, profitable
//! and desirable sets. An instance whose target set is empty is excluded
//! from that metric.

mod baselines;
mod report;

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{
    check_coverage, compute_outcomes_with, AlignmentError, KgSettings, MarketReturns, OutcomeSets, PromptContext,
    DEFAULT_HORIZON_DAYS,
};
use crate::data::{CustomerProfile, Dataset};
use crate::prompt::{parse_response, Ablation, PromptInstance};
use crate::schedule::Schedule;

pub use baselines::{
    load_responses, OracleRecommender, PopularityBaseline, RandomBaseline, ResponseRecord, ResponsesRecommender,
};
pub use report::{plot_data_csv, results_csv, ResultRow};

pub const K: usize = 3;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("universe has {0} assets, need at least 3")]
    UniverseTooSmall(usize),
    #[error("responses file {path}: {reason}")]
    Responses { path: String, reason: String },
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestInstance {
    /// `{customer_id}_{YYYY-MM-DD}`.
    pub instance_id: String,
    pub prompt: PromptInstance,
    pub outcomes: OutcomeSets,
}

pub fn instance_id(customer_id: &str, date: NaiveDate) -> String {
    format!("{customer_id}_{date}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestSetConfig {
    pub schedule: Schedule,
    pub horizon_days: i64,
    pub ablation: Ablation,
    pub kg: KgSettings,
}

impl Default for TestSetConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::test(),
            horizon_days: DEFAULT_HORIZON_DAYS,
            ablation: Ablation::Combined,
            kg: KgSettings::default(),
        }
    }
}

/// One instance per (eligible customer, tick), in (customer, date) order.
///
/// Ticks at which no asset has price data over the horizon are skipped with
/// a warning.
pub fn build_test_set(
    dataset: &Dataset,
    config: &TestSetConfig,
    filter: Option<&(dyn Fn(&CustomerProfile) -> bool + Sync)>,
) -> Result<Vec<TestInstance>, AlignmentError> {
    let ticks = config.schedule.ticks();
    let (Some(first), Some(last)) = (ticks.first(), ticks.last()) else {
        return Ok(Vec::new());
    };
    check_coverage(dataset, *first, *last + Duration::days(config.horizon_days))?;
    let markets: Vec<MarketReturns> = ticks
        .par_iter()
        .map(|t| MarketReturns::at(dataset, *t, config.horizon_days))
        .collect();
    for m in markets.iter().filter(|m| m.is_empty()) {
        log::warn!("no asset has price data after {}; instances skipped", m.date);
    }
    let context = PromptContext::new(dataset, config.kg.clone());
    let work: Vec<(&str, usize)> = dataset
        .profiles()
        .iter()
        .filter(|p| filter.is_none_or(|f| f(p)))
        .flat_map(|p| (0..ticks.len()).map(move |i| (p.customer_id.as_str(), i)))
        .filter(|(_, i)| !markets[*i].is_empty())
        .collect();
    work.par_iter()
        .map(|&(customer, i)| {
            let prompt = context.instance(customer, ticks[i], config.ablation)?;
            let outcomes = compute_outcomes_with(dataset, &markets[i], customer)?;
            Ok(TestInstance {
                instance_id: instance_id(customer, ticks[i]),
                prompt,
                outcomes,
            })
        })
        .collect()
}

/// 1 iff any of the first `k` recommendations is in `target`.
pub fn hits_at_k<S: AsRef<str>>(recommended: &[S], target: &BTreeSet<String>, k: usize) -> u8 {
    recommended.iter().take(k).any(|r| target.contains(r.as_ref())) as u8
}

/// A recommender answers each instance with free text in the prompt's
/// output format.
pub trait Recommender: Sync {
    fn name(&self) -> String;
    fn respond(&self, instance: &TestInstance) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "Pref@3")]
    Pref,
    #[serde(rename = "Prof@3")]
    Prof,
    #[serde(rename = "Comb@3")]
    Comb,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Pref, Metric::Prof, Metric::Comb];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Pref => "Pref@3",
            Metric::Prof => "Prof@3",
            Metric::Comb => "Comb@3",
        }
    }

    pub fn target(self, o: &OutcomeSets) -> &BTreeSet<String> {
        match self {
            Metric::Pref => &o.purchased,
            Metric::Prof => &o.profitable,
            Metric::Comb => &o.desirable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: Metric,
    pub mean: f64,
    /// `sqrt(mean * (1 - mean) / n)`, 0 when `n = 0`.
    pub stderr: f64,
    pub n: usize,
    /// Instances dropped because the target set was empty.
    pub excluded: usize,
}

impl MetricResult {
    pub fn from_hits(name: Metric, hits: usize, n: usize, excluded: usize) -> Self {
        let (mean, stderr) = if n == 0 {
            (0.0, 0.0)
        } else {
            let p = hits as f64 / n as f64;
            (p, (p * (1.0 - p) / n as f64).sqrt())
        };
        Self {
            name,
            mean,
            stderr,
            n,
            excluded,
        }
    }
}

/// Per-instance hits; `None` where the metric's target is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance_id: String,
    pub recommended: Vec<String>,
    pub hits: [Option<u8>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub recommender: String,
    pub metrics: [MetricResult; 3],
    pub instances: Vec<InstanceScore>,
}

impl Evaluation {
    pub fn metric(&self, m: Metric) -> &MetricResult {
        &self.metrics[m as usize]
    }
}

pub fn score_instance(response: &str, instance: &TestInstance) -> InstanceScore {
    let mut recommended = parse_response(response).isins;
    recommended.truncate(K);
    let hits = Metric::ALL.map(|m| {
        let target = m.target(&instance.outcomes);
        (!target.is_empty()).then(|| hits_at_k(&recommended, target, K))
    });
    InstanceScore {
        instance_id: instance.instance_id.clone(),
        recommended,
        hits,
    }
}

pub fn evaluate(recommender: &dyn Recommender, instances: &[TestInstance]) -> Evaluation {
    let scores: Vec<InstanceScore> = instances
        .par_iter()
        .map(|inst| score_instance(&recommender.respond(inst), inst))
        .collect();
    let metrics = Metric::ALL.map(|m| {
        let i = m as usize;
        let counted: Vec<u8> = scores.iter().filter_map(|s| s.hits[i]).collect();
        let hits = counted.iter().map(|h| *h as usize).sum();
        MetricResult::from_hits(m, hits, counted.len(), scores.len() - counted.len())
    });
    Evaluation {
        recommender: recommender.name(),
        metrics,
        instances: scores,
    }
}
