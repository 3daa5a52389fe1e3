//! Built-in recommenders and the responses-file adapter.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{EvalError, Recommender, TestInstance, K};
use crate::data::{Dataset, TxType};
use crate::prompt::{render_completion, DEFAULT_INTRO};
use crate::seed::rng_for;

fn render(isins: &[&str]) -> String {
    if isins.is_empty() {
        return DEFAULT_INTRO.to_string();
    }
    render_completion(isins, DEFAULT_INTRO).expect("1..=3 assets")
}

/// Three distinct assets drawn uniformly per instance.
pub struct RandomBaseline {
    universe: Vec<String>,
    seed: u64,
}

impl RandomBaseline {
    pub fn new(universe: &BTreeSet<String>, seed: u64) -> Result<Self, EvalError> {
        if universe.len() < K {
            return Err(EvalError::UniverseTooSmall(universe.len()));
        }
        Ok(Self {
            universe: universe.iter().cloned().collect(),
            seed,
        })
    }

    pub fn pick(&self, instance_id: &str) -> Vec<&str> {
        let mut rng = rng_for(self.seed, &["random", instance_id]);
        sample(&mut rng, self.universe.len(), K)
            .into_iter()
            .map(|i| self.universe[i].as_str())
            .collect()
    }
}

impl Recommender for RandomBaseline {
    fn name(&self) -> String {
        "Random".into()
    }

    fn respond(&self, instance: &TestInstance) -> String {
        render(&self.pick(&instance.instance_id))
    }
}

/// Most-bought assets, counting Buys strictly before the recommendation
/// date. Ties go to the smaller ISIN.
pub struct PopularityBaseline {
    /// Sorted Buy dates per asset, covering every dataset asset.
    buys: BTreeMap<String, Vec<NaiveDate>>,
    cutoff_per_instance: bool,
}

impl PopularityBaseline {
    pub fn new(dataset: &Dataset, cutoff_per_instance: bool) -> Self {
        let mut buys: BTreeMap<String, Vec<NaiveDate>> =
            dataset.assets().iter().map(|a| (a.isin.clone(), Vec::new())).collect();
        for t in dataset.transactions().iter().filter(|t| t.tx_type == TxType::Buy) {
            buys.entry(t.isin.clone()).or_default().push(t.timestamp);
        }
        buys.values_mut().for_each(|v| v.sort());
        Self {
            buys,
            cutoff_per_instance,
        }
    }

    pub fn top(&self, date: NaiveDate, k: usize) -> Vec<&str> {
        let mut counts: Vec<(usize, &str)> = self
            .buys
            .iter()
            .map(|(isin, dates)| {
                let n = if self.cutoff_per_instance {
                    dates.partition_point(|d| *d < date)
                } else {
                    dates.len()
                };
                (n, isin.as_str())
            })
            .collect();
        counts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        counts.into_iter().take(k).map(|(_, isin)| isin).collect()
    }
}

impl Recommender for PopularityBaseline {
    fn name(&self) -> String {
        "Popularity".into()
    }

    fn respond(&self, instance: &TestInstance) -> String {
        render(&self.top(instance.prompt.recommendation_date, K))
    }
}

/// Recommends the first desirable, purchased and profitable asset (skipping
/// ones already picked), then fills up in the same order. Every non-empty
/// target set is hit, so all three metrics score 1.
pub struct OracleRecommender;

impl Recommender for OracleRecommender {
    fn name(&self) -> String {
        "Oracle".into()
    }

    fn respond(&self, instance: &TestInstance) -> String {
        let o = &instance.outcomes;
        let mut picks: Vec<&str> = Vec::new();
        for set in [&o.desirable, &o.purchased, &o.profitable] {
            if set.iter().any(|i| picks.contains(&i.as_str())) {
                continue;
            }
            if let Some(first) = set.iter().next() {
                picks.push(first);
            }
        }
        for isin in o.desirable.iter().chain(&o.purchased).chain(&o.profitable) {
            if picks.len() == K {
                break;
            }
            if !picks.contains(&isin.as_str()) {
                picks.push(isin);
            }
        }
        render(&picks)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub instance_id: String,
    pub response_text: String,
}

pub fn load_responses(path: &Path) -> Result<BTreeMap<String, String>, EvalError> {
    let err = |reason: String| EvalError::Responses {
        path: path.display().to_string(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: ResponseRecord =
            serde_json::from_str(line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
        if out.insert(r.instance_id.clone(), r.response_text).is_some() {
            return Err(err(format!("line {}: duplicate instance {}", i + 1, r.instance_id)));
        }
    }
    Ok(out)
}

/// Responses produced offline by an external model.
pub struct ResponsesRecommender {
    name: String,
    responses: BTreeMap<String, String>,
}

impl ResponsesRecommender {
    pub fn new(name: impl Into<String>, responses: BTreeMap<String, String>) -> Self {
        Self {
            name: name.into(),
            responses,
        }
    }

    pub fn from_file(name: impl Into<String>, path: &Path) -> Result<Self, EvalError> {
        Ok(Self::new(name, load_responses(path)?))
    }
}

impl Recommender for ResponsesRecommender {
    fn name(&self) -> String {
        self.name.clone()
    }

    /// A missing instance scores as an empty response.
    fn respond(&self, instance: &TestInstance) -> String {
        match self.responses.get(&instance.instance_id) {
            Some(text) => text.clone(),
            None => {
                log::warn!("no response for {}", instance.instance_id);
                String::new()
            }
        }
    }
}
