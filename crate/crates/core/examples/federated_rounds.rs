//! Run federated rounds with the deterministic mock trainer on toy corpora
//! and watch the global adapter move.
//!
//! `cargo run -p finalign --example federated_rounds -- [rounds]`

use finalign::federation::{run_rounds, ClientCorpus, RoundConfig};
use finalign::trainer::{toy_adapter, LoraShape, MockTrainer, DEFAULT_ETA};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rounds: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let dir = tempfile::tempdir()?;

    // Client c holds a corpus whose labels lean true for even c.
    let mut corpora = Vec::new();
    for c in 0..20 {
        let path = dir.path().join(format!("client_{c:02}.jsonl"));
        let lines: String = (0..40)
            .map(|i| format!("{{\"messages\":[],\"completion\":\"- X\",\"label\":{}}}\n", (i + c) % 3 != 0))
            .collect();
        std::fs::write(&path, lines)?;
        corpora.push(ClientCorpus {
            client_id: c,
            path,
            examples: 40,
        });
    }

    let shape = LoraShape::default();
    let initial = toy_adapter(&shape, 23);
    let cfg = RoundConfig {
        rounds,
        seed: 19,
        ..RoundConfig::default()
    };
    let out = run_rounds(&cfg, &corpora, &MockTrainer::new(DEFAULT_ETA), &initial, &dir.path().join("work"))?;
    for log in out.logs.iter().take(5).chain(out.logs.last()) {
        println!(
            "round {:>3}: clients {:?} saw {:?} digest {}",
            log.round_index,
            log.selected_clients,
            log.examples_seen,
            &log.adapter_digest[..12]
        );
    }
    let drift: f32 = initial
        .iter()
        .filter(|(_, t)| t.dtype() == finalign::trainer::Dtype::F32)
        .map(|(n, t)| {
            let end = out.final_adapter.get(n).unwrap().to_f32();
            t.to_f32().iter().zip(end).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max)
        })
        .fold(0.0, f32::max);
    println!("max |change| over {rounds} rounds: {drift:.6}");
    Ok(())
}
