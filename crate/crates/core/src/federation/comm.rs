//! Adapter size model and per-round communication accounting.

use serde::{Deserialize, Serialize};

pub const BYTES_PER_MB: f64 = 1_048_576.0;
pub const DEFAULT_BITS_PER_PARAM: u32 = 4;

/// Reference LoRA configurations: (model, trainable parameters).
pub const REFERENCE_MODELS: [(&str, u64); 4] = [
    ("Qwen3-0.6B", 10_092_544),
    ("Qwen3-1.7B", 17_432_576),
    ("Qwen3-4B", 33_030_144),
    ("Qwen3-8B", 43_646_976),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdapterSize {
    pub bytes: u64,
    /// `bytes / 2^20`.
    pub mb: f64,
}

/// `ceil(params * bits / 8)` bytes.
pub fn adapter_size(trainable_params: u64, bits_per_param: u32) -> AdapterSize {
    let bits = trainable_params as u128 * bits_per_param as u128;
    let bytes = bits.div_ceil(8) as u64;
    AdapterSize {
        bytes,
        mb: bytes as f64 / BYTES_PER_MB,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub model: String,
    pub trainable_params: u64,
    pub adapter_bytes: u64,
    pub adapter_mb: f64,
    pub per_round_mb: f64,
    pub total_mb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommReport {
    pub adapter_bytes: u64,
    pub rounds: u64,
    pub uploads_per_round: u64,
    pub broadcast_targets: u64,
    pub per_round_bytes: u64,
    pub total_bytes: u64,
    pub per_round_mb: f64,
    pub total_mb: f64,
    pub rows: Vec<SizeRow>,
}

/// `(uploads_per_round + broadcast_targets) * adapter_bytes` per round.
pub fn comm_cost(adapter_bytes: u64, rounds: u64, uploads_per_round: u64, broadcast_targets: u64) -> CommReport {
    let factor = uploads_per_round + broadcast_targets;
    let per_round_bytes = factor * adapter_bytes;
    let total_bytes = per_round_bytes * rounds;
    CommReport {
        adapter_bytes,
        rounds,
        uploads_per_round,
        broadcast_targets,
        per_round_bytes,
        total_bytes,
        per_round_mb: per_round_bytes as f64 / BYTES_PER_MB,
        total_mb: total_bytes as f64 / BYTES_PER_MB,
        rows: Vec::new(),
    }
}

impl CommReport {
    /// Attach one row per `(model, params)` under the same topology.
    pub fn with_rows<'a>(mut self, models: impl IntoIterator<Item = (&'a str, u64)>, bits_per_param: u32) -> Self {
        for (model, params) in models {
            let size = adapter_size(params, bits_per_param);
            let c = comm_cost(size.bytes, self.rounds, self.uploads_per_round, self.broadcast_targets);
            self.rows.push(SizeRow {
                model: model.to_string(),
                trainable_params: params,
                adapter_bytes: size.bytes,
                adapter_mb: size.mb,
                per_round_mb: c.per_round_mb,
                total_mb: c.total_mb,
            });
        }
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,trainable_params,adapter_bytes,adapter_mb,per_round_mb,total_mb\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.model, r.trainable_params, r.adapter_bytes, r.adapter_mb, r.per_round_mb, r.total_mb
            ));
        }
        out
    }
}
