//! Communication rounds and adapter aggregation.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FederationError;
use crate::seed::{derive_seed, rng_for, sha256_hex};
use crate::trainer::{load_adapter, save_adapter, AdapterTensors, Dtype, Tensor, TrainRequest, Trainer, TrainerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weight each returned adapter by the examples its client consumed.
    Examples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoundConfig {
    pub rounds: usize,
    pub clients_per_round: usize,
    pub n_clients: usize,
    pub local_epoch_fraction: f64,
    pub weighting: Weighting,
    pub seed: u64,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            rounds: 200,
            clients_per_round: 3,
            n_clients: 20,
            local_epoch_fraction: 0.1,
            weighting: Weighting::Uniform,
            seed: 0,
        }
    }
}

/// A client's corpus file and its example count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientCorpus {
    pub client_id: usize,
    pub path: PathBuf,
    pub examples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round_index: usize,
    pub selected_clients: Vec<usize>,
    /// Examples consumed by each selected client, in `selected_clients` order.
    pub examples_seen: Vec<usize>,
    /// SHA-256 of the aggregated adapter's FLAT bytes.
    pub adapter_digest: String,
    pub bytes_uploaded: u64,
    pub bytes_downloaded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub logs: Vec<RoundLog>,
    pub final_adapter: AdapterTensors,
}

/// Clients for `round`, drawn without replacement and sorted.
pub fn select_clients(seed: u64, round: usize, n_clients: usize, k: usize) -> Vec<usize> {
    let mut rng = rng_for(seed, &["select", &round.to_string()]);
    let mut picked = rand::seq::index::sample(&mut rng, n_clients, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Seed passed to `client`'s trainer in `round`.
pub fn train_seed(seed: u64, round: usize, client: usize) -> u64 {
    derive_seed(seed, &["train", &round.to_string(), &client.to_string()])
}

fn check_layout(adapters: &[AdapterTensors]) -> Result<&AdapterTensors, FederationError> {
    let first = adapters
        .first()
        .ok_or_else(|| FederationError::Invalid("nothing to aggregate".into()))?;
    if let Some(i) = adapters.iter().position(|a| !a.same_layout(first)) {
        return Err(FederationError::ShapeMismatch(format!("adapter {i} differs from adapter 0")));
    }
    Ok(first)
}

/// Element-wise arithmetic mean.
pub fn aggregate(adapters: &[AdapterTensors]) -> Result<AdapterTensors, FederationError> {
    aggregate_weighted(adapters, &vec![1.0; adapters.len()])
}

/// Element-wise weighted mean, accumulated in f64 with adapters taken in
/// byte order. f32 results are rounded to nearest f32; 4-bit results to the
/// nearest integer, halves away from zero. Metadata is taken from the first
/// adapter.
pub fn aggregate_weighted(adapters: &[AdapterTensors], weights: &[f64]) -> Result<AdapterTensors, FederationError> {
    let first = check_layout(adapters)?;
    if weights.len() != adapters.len() || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(FederationError::Invalid("one finite non-negative weight per adapter".into()));
    }
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = if total > 0.0 {
        weights.to_vec()
    } else {
        vec![1.0; adapters.len()]
    };
    // Summing in a canonical order makes the result independent of input order.
    let keys: Vec<Vec<u8>> = adapters.iter().map(AdapterTensors::to_bytes).collect();
    let mut order: Vec<usize> = (0..adapters.len()).collect();
    order.sort_by(|&i, &j| keys[i].cmp(&keys[j]).then(weights[i].total_cmp(&weights[j])));
    let total: f64 = order.iter().map(|&i| weights[i]).sum();

    let mut out = AdapterTensors::new();
    out.metadata = first.metadata.clone();
    for (name, t) in first.iter() {
        let mut acc = vec![0.0f64; t.len()];
        for &i in &order {
            let (tensor, w) = (adapters[i].get(name).expect("layouts checked"), weights[i]);
            match t.dtype() {
                Dtype::F32 => acc.iter_mut().zip(tensor.to_f32()).for_each(|(s, v)| *s += w * f64::from(v)),
                Dtype::U4 => acc.iter_mut().zip(tensor.to_u4()).for_each(|(s, v)| *s += w * f64::from(v)),
            }
        }
        let shape = t.shape().to_vec();
        let merged = match t.dtype() {
            Dtype::F32 => {
                let vals: Vec<f32> = acc.iter().map(|s| (s / total) as f32).collect();
                Tensor::from_f32(shape, &vals)
            }
            Dtype::U4 => {
                let vals: Vec<u8> = acc.iter().map(|s| (s / total).round().clamp(0.0, 15.0) as u8).collect();
                Tensor::from_u4(shape, &vals)
            }
        }
        .expect("shape preserved");
        out.insert(name, merged);
    }
    Ok(out)
}

fn adapter_digest(a: &AdapterTensors) -> String {
    sha256_hex(&a.to_bytes())
}

/// Run `config.rounds` rounds starting from `initial`.
///
/// Adapter files are exchanged under `workdir`. A selected client whose
/// corpus is empty returns the global adapter unchanged. On trainer failure
/// the logs of completed rounds are returned inside the error.
pub fn run_rounds(
    config: &RoundConfig,
    corpora: &[ClientCorpus],
    trainer: &dyn Trainer,
    initial: &AdapterTensors,
    workdir: &Path,
) -> Result<RunOutcome, FederationError> {
    if config.n_clients == 0 || config.clients_per_round == 0 || config.clients_per_round > config.n_clients {
        return Err(FederationError::Invalid(format!(
            "need 1 <= clients_per_round ({}) <= n_clients ({})",
            config.clients_per_round, config.n_clients
        )));
    }
    if !(config.local_epoch_fraction > 0.0 && config.local_epoch_fraction <= 1.0) {
        return Err(FederationError::Invalid(format!(
            "local_epoch_fraction {} outside (0, 1]",
            config.local_epoch_fraction
        )));
    }
    if config.rounds > 0 && corpora.iter().all(|c| c.examples == 0) {
        return Err(FederationError::NoCorpus);
    }
    std::fs::create_dir_all(workdir).map_err(TrainerError::from)?;
    let corpus_of = |client: usize| corpora.iter().find(|c| c.client_id == client);

    let adapter_bytes = initial.payload_bytes() as u64;
    let mut global = initial.clone();
    let mut logs = Vec::with_capacity(config.rounds);
    for round in 0..config.rounds {
        let selected = select_clients(config.seed, round, config.n_clients, config.clients_per_round);
        let global_path = workdir.join(format!("global_round{round:04}.flat"));
        save_adapter(&global, &global_path).map_err(TrainerError::from)?;

        let results: Vec<Result<(AdapterTensors, usize, Option<PathBuf>), (usize, TrainerError)>> = selected
            .par_iter()
            .map(|&client| {
                let corpus = match corpus_of(client) {
                    Some(c) if c.examples > 0 => c,
                    _ => return Ok((global.clone(), 0, None)),
                };
                let request = TrainRequest {
                    round,
                    client_id: client,
                    epoch_fraction: config.local_epoch_fraction,
                    adapter_in: global_path.clone(),
                    corpus: corpus.path.clone(),
                    seed: train_seed(config.seed, round, client),
                };
                let resp = trainer.train(&request).map_err(|e| (client, e))?;
                let adapter = load_adapter(&resp.adapter_out).map_err(|e| (client, e.into()))?;
                Ok((adapter, resp.examples_seen, Some(resp.adapter_out)))
            })
            .collect();

        let mut adapters = Vec::with_capacity(selected.len());
        let mut seen = Vec::with_capacity(selected.len());
        for r in results {
            match r {
                Ok((a, n, path)) => {
                    adapters.push(a);
                    seen.push(n);
                    if let Some(p) = path {
                        let _ = std::fs::remove_file(p);
                    }
                }
                Err((client, source)) => {
                    return Err(FederationError::TrainerFailure(Box::new(TrainerFailure {
                        round,
                        client,
                        source,
                        logs,
                    })))
                }
            }
        }
        let weights: Vec<f64> = match config.weighting {
            Weighting::Uniform => vec![1.0; adapters.len()],
            Weighting::Examples => seen.iter().map(|n| *n as f64).collect(),
        };
        global = aggregate_weighted(&adapters, &weights)?;
        let _ = std::fs::remove_file(&global_path);
        logs.push(RoundLog {
            round_index: round,
            selected_clients: selected,
            examples_seen: seen,
            adapter_digest: adapter_digest(&global),
            bytes_uploaded: config.clients_per_round as u64 * adapter_bytes,
            bytes_downloaded: config.n_clients as u64 * adapter_bytes,
        });
        log::debug!("round {round} done");
    }
    Ok(RunOutcome {
        logs,
        final_adapter: global,
    })
}

#[derive(Debug)]
pub struct TrainerFailure {
    pub round: usize,
    pub client: usize,
    pub source: TrainerError,
    /// Logs of the rounds completed before the failure.
    pub logs: Vec<RoundLog>,
}
