//! Deterministic stand-in for a local fine-tuning step.
//!
//! For each consumed example `i` and each f32 tensor `name`, every element
//! moves by `±(epoch_fraction * eta)`: the sign is `+` for label-true and `-`
//! for label-false examples, multiplied by a per-element direction `±1` drawn
//! from a SplitMix64 stream seeded with the first 8 bytes (little-endian) of
//! `SHA-256("{name}:{i}:{seed}")`. The direction of element `k` is `+1` iff the
//! top bit of the `k`-th stream output is set. Arithmetic is f32. Examples are
//! consumed cyclically from offset `derive_seed(seed, ["offset"]) % n`, and
//! `i` is the corpus line index. 4-bit tensors are left unchanged.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use super::flat::{load_adapter, save_adapter, AdapterTensors, Dtype};
use super::{output_path, TrainRequest, TrainResponse, Trainer, TrainerError};
use crate::alignment::read_labels;
use crate::seed::derive_seed;

pub const DEFAULT_ETA: f64 = 1e-3;

pub(crate) struct SplitMix64(u64);

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

fn direction_seed(name: &str, index: usize, seed: u64) -> u64 {
    let digest = Sha256::digest(format!("{name}:{index}:{seed}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// `round(epoch_fraction * n)`, halves rounded away from zero.
pub fn examples_to_consume(epoch_fraction: f64, n: usize) -> usize {
    (epoch_fraction * n as f64).round() as usize
}

/// Apply the mock update rule in memory.
pub fn apply_mock_rule(adapter: &mut AdapterTensors, labels: &[bool], epoch_fraction: f64, eta: f64, seed: u64) -> usize {
    let n = labels.len();
    if n == 0 {
        return 0;
    }
    let consumed = examples_to_consume(epoch_fraction, n);
    let start = (derive_seed(seed, &["offset"]) % n as u64) as usize;
    let step = (epoch_fraction * eta) as f32;
    let names: Vec<String> = adapter
        .iter()
        .filter(|(_, t)| t.dtype() == Dtype::F32)
        .map(|(n, _)| n.to_string())
        .collect();
    for name in names {
        let tensor = adapter.get_mut(&name).expect("name taken from adapter");
        let mut values = tensor.to_f32();
        for j in 0..consumed {
            let index = (start + j) % n;
            let sign: f32 = if labels[index] { 1.0 } else { -1.0 };
            let mut stream = SplitMix64::new(direction_seed(&name, index, seed));
            for v in values.iter_mut() {
                let dir: f32 = if stream.next_u64() >> 63 == 1 { 1.0 } else { -1.0 };
                *v += sign * dir * step;
            }
        }
        tensor.set_f32(&values);
    }
    consumed
}

fn validate(request: &TrainRequest) -> Result<(), TrainerError> {
    if !(request.epoch_fraction >= 0.0 && request.epoch_fraction <= 1.0) {
        return Err(TrainerError::InvalidRequest(format!(
            "epoch_fraction {} outside [0, 1]",
            request.epoch_fraction
        )));
    }
    Ok(())
}

/// Run the mock rule from files and write the result next to `adapter_in`.
pub fn mock_train(request: &TrainRequest, eta: f64) -> Result<TrainResponse, TrainerError> {
    let labels = read_labels(&request.corpus).map_err(|e| TrainerError::Corpus(e.to_string()))?;
    mock_train_with_labels(request, &labels, eta)
}

fn mock_train_with_labels(request: &TrainRequest, labels: &[bool], eta: f64) -> Result<TrainResponse, TrainerError> {
    validate(request)?;
    if labels.is_empty() {
        return Err(TrainerError::CorpusEmpty(request.corpus.clone()));
    }
    let mut adapter = load_adapter(&request.adapter_in)?;
    let seen = apply_mock_rule(&mut adapter, labels, request.epoch_fraction, eta, request.seed);
    let out = output_path(request);
    save_adapter(&adapter, &out)?;
    let mut stats = serde_json::Map::new();
    stats.insert("trainer".into(), "mock".into());
    stats.insert("eta".into(), eta.into());
    stats.insert("label_true".into(), labels.iter().filter(|l| **l).count().into());
    Ok(TrainResponse {
        adapter_out: out,
        examples_seen: seen,
        trainer_stats: stats,
    })
}

/// In-process mock trainer with a per-corpus label cache.
pub struct MockTrainer {
    pub eta: f64,
    cache: Mutex<HashMap<PathBuf, Arc<Vec<bool>>>>,
}

impl MockTrainer {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn labels(&self, path: &Path) -> Result<Arc<Vec<bool>>, TrainerError> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(path) {
            return Ok(hit.clone());
        }
        let labels = Arc::new(read_labels(path).map_err(|e| TrainerError::Corpus(e.to_string()))?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(path.to_path_buf(), labels.clone());
        Ok(labels)
    }
}

impl Default for MockTrainer {
    fn default() -> Self {
        Self::new(DEFAULT_ETA)
    }
}

impl Trainer for MockTrainer {
    fn train(&self, request: &TrainRequest) -> Result<TrainResponse, TrainerError> {
        let labels = self.labels(&request.corpus)?;
        mock_train_with_labels(request, &labels, self.eta)
    }
}
