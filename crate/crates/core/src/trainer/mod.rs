//! Adapter container, local trainers and the trainer wire protocol.
//!
//! A trainer receives a [`TrainRequest`] naming an input adapter file and a
//! client corpus, writes an updated adapter, and answers with a
//! [`TrainResponse`]. External trainers speak the same schema as one JSON
//! object per line; a failure is reported as `{"error": "<message>"}`.
//!
//! Trainers write their output to [`output_path`], a deterministic sibling of
//! `adapter_in`, so adapters are exchanged by path only.

mod external;
mod flat;
mod mock;
mod serve;

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{Endpoint, ExternalTrainer, DEFAULT_TIMEOUT};
pub use flat::{load_adapter, save_adapter, AdapterTensors, Dtype, FlatError, Tensor, MAGIC};
pub use mock::{apply_mock_rule, examples_to_consume, mock_train, MockTrainer, DEFAULT_ETA};
pub use serve::{handle_line, serve, serve_tcp, ServeMode};

use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRequest {
    pub round: usize,
    pub client_id: usize,
    pub epoch_fraction: f64,
    pub adapter_in: PathBuf,
    pub corpus: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub adapter_out: PathBuf,
    pub examples_seen: usize,
    #[serde(default)]
    pub trainer_stats: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("corpus {0} is empty")]
    CorpusEmpty(PathBuf),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("trainer timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("trainer reported: {0}")]
    TrainerReportedError(String),
    #[error(transparent)]
    Flat(#[from] FlatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One local training step.
pub trait Trainer: Send + Sync {
    fn train(&self, request: &TrainRequest) -> Result<TrainResponse, TrainerError>;
}

/// Where a trainer writes the adapter for `request`.
pub fn output_path(request: &TrainRequest) -> PathBuf {
    let dir = request.adapter_in.parent().unwrap_or(Path::new("."));
    dir.join(format!("client{:02}_round{:04}.flat", request.client_id, request.round))
}

/// LoRA shape settings for the toy adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoraShape {
    /// Adapted modules. The list is arbitrary; only shapes matter.
    pub layers: Vec<String>,
    pub hidden: usize,
    pub rank: usize,
    pub alpha: u32,
    /// Bit width used by the size model.
    pub quant_bits: u32,
}

impl Default for LoraShape {
    fn default() -> Self {
        Self {
            layers: ["layers.0.q_proj", "layers.0.v_proj", "layers.1.q_proj", "layers.1.v_proj"]
                .map(String::from)
                .to_vec(),
            hidden: 64,
            rank: 16,
            alpha: 64,
            quant_bits: 4,
        }
    }
}

impl LoraShape {
    /// Trainable parameters: `A[r x d]` and `B[d x r]` per layer.
    pub fn param_count(&self) -> usize {
        self.layers.len() * 2 * self.rank * self.hidden
    }
}

/// Seeded toy adapter: `A` uniform in `±1/sqrt(d)`, `B` zero, rank and alpha
/// recorded as metadata.
pub fn toy_adapter(shape: &LoraShape, seed: u64) -> AdapterTensors {
    let mut a = AdapterTensors::new();
    a.metadata.insert("lora_rank".into(), shape.rank.to_string());
    a.metadata.insert("lora_alpha".into(), shape.alpha.to_string());
    a.metadata.insert("quant_bits".into(), shape.quant_bits.to_string());
    let bound = 1.0 / (shape.hidden as f32).sqrt();
    for layer in &shape.layers {
        let mut rng = rng_for(seed, &["lora_A", layer]);
        let n = shape.rank * shape.hidden;
        let values: Vec<f32> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        a.insert(
            format!("{layer}.lora_A"),
            Tensor::from_f32(vec![shape.rank, shape.hidden], &values).expect("shape matches"),
        );
        a.insert(
            format!("{layer}.lora_B"),
            Tensor::from_f32(vec![shape.hidden, shape.rank], &vec![0.0; n]).expect("shape matches"),
        );
    }
    a
}
