//! Per-client training corpora over a prompt schedule.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_kto_pair, check_coverage, compute_outcomes_with, AlignmentError, KgSettings, KtoExample, MarketReturns,
    PromptContext, DEFAULT_HORIZON_DAYS,
};
use crate::data::Dataset;
use crate::federation::{Assignment, ClientCorpus};
use crate::prompt::{Ablation, MAX_COMPLETION_ASSETS};
use crate::schedule::Schedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub schedule: Schedule,
    pub horizon_days: i64,
    pub max_assets: usize,
    pub ablation: Ablation,
    pub kg: KgSettings,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::training(),
            horizon_days: DEFAULT_HORIZON_DAYS,
            max_assets: MAX_COMPLETION_ASSETS,
            ablation: Ablation::Combined,
            kg: KgSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub prompts: usize,
    pub examples: usize,
    pub label_true: usize,
    pub label_false: usize,
    /// Prompts that produced both a label-true and a label-false example.
    pub complete_pairs: usize,
    /// `label_true / examples`, or 0 for an empty corpus.
    pub label_true_ratio: f64,
    pub per_client: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Examples of client `c` at index `c`, ordered by (customer, date).
    pub clients: Vec<Vec<KtoExample>>,
}

impl Corpus {
    pub fn stats(&self) -> CorpusStats {
        let mut s = CorpusStats {
            per_client: self.clients.iter().map(Vec::len).collect(),
            ..Default::default()
        };
        for ex in self.clients.iter().flatten() {
            s.examples += 1;
            if ex.label {
                s.label_true += 1;
            } else {
                s.label_false += 1;
            }
        }
        // Examples of one prompt are adjacent and share messages.
        for client in &self.clients {
            let mut i = 0;
            while i < client.len() {
                s.prompts += 1;
                if i + 1 < client.len() && client[i + 1].messages == client[i].messages {
                    s.complete_pairs += 1;
                    i += 2;
                } else {
                    i += 1;
                }
            }
        }
        if s.examples > 0 {
            s.label_true_ratio = s.label_true as f64 / s.examples as f64;
        }
        s
    }
}

/// One prompt per (assigned customer, schedule tick), each expanded with
/// [`build_kto_pair`] over the assets priced in that tick's window.
pub fn build_training_corpus(
    dataset: &Dataset,
    assignment: &Assignment,
    config: &CorpusConfig,
    seed: u64,
) -> Result<Corpus, AlignmentError> {
    let ticks = config.schedule.ticks();
    let (Some(first), Some(last)) = (ticks.first(), ticks.last()) else {
        return Ok(Corpus {
            clients: vec![Vec::new(); assignment.n_clients],
        });
    };
    check_coverage(dataset, *first, *last + Duration::days(config.horizon_days))?;
    for customer in assignment.clients.keys() {
        if dataset.profile(customer).is_none() {
            return Err(AlignmentError::UnknownCustomer(customer.clone()));
        }
    }

    let markets: Vec<MarketReturns> = ticks
        .par_iter()
        .map(|t| MarketReturns::at(dataset, *t, config.horizon_days))
        .collect();
    let universes: Vec<_> = markets.iter().map(MarketReturns::covered).collect();
    let context = PromptContext::new(dataset, config.kg.clone());

    let mut work: Vec<(usize, &str, usize)> = Vec::new();
    for client in 0..assignment.n_clients {
        for customer in assignment.customers_of(client) {
            work.extend((0..ticks.len()).map(|i| (client, customer, i)));
        }
    }
    let produced: Vec<(usize, Vec<KtoExample>)> = work
        .par_iter()
        .map(|&(client, customer, i)| {
            let instance = context.instance(customer, ticks[i], config.ablation)?;
            let outcomes = compute_outcomes_with(dataset, &markets[i], customer)?;
            let pair = build_kto_pair(&instance, &outcomes, &universes[i], config.max_assets, seed)?;
            Ok((client, pair))
        })
        .collect::<Result<_, AlignmentError>>()?;

    let mut clients = vec![Vec::new(); assignment.n_clients];
    for (client, pair) in produced {
        clients[client].extend(pair);
    }
    Ok(Corpus { clients })
}

pub fn client_file_name(client: usize) -> String {
    format!("client_{client:02}.jsonl")
}

/// Write one JSON-lines file per client into `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> std::io::Result<Vec<ClientCorpus>> {
    fs::create_dir_all(dir)?;
    corpus
        .clients
        .iter()
        .enumerate()
        .map(|(client, examples)| {
            let path = dir.join(client_file_name(client));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            for ex in examples {
                serde_json::to_writer(&mut w, ex)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            Ok(ClientCorpus {
                client_id: client,
                path,
                examples: examples.len(),
            })
        })
        .collect()
}

fn jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> std::io::Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), i + 1),
            )
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> std::io::Result<Vec<KtoExample>> {
    jsonl(path)
}

/// Labels of a corpus file in line order.
pub fn read_labels(path: &Path) -> std::io::Result<Vec<bool>> {
    #[derive(Deserialize)]
    struct Label {
        label: bool,
    }
    Ok(jsonl::<Label>(path)?.into_iter().map(|l| l.label).collect())
}

/// Recommendation dates of a schedule that fit the dataset's price coverage.
pub fn covered_ticks(dataset: &Dataset, schedule: &Schedule, horizon_days: i64) -> Vec<NaiveDate> {
    schedule
        .ticks()
        .into_iter()
        .filter(|t| check_coverage(dataset, *t, *t + Duration::days(horizon_days)).is_ok())
        .collect()
}
