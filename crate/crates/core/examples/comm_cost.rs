//! Communication volume of a federated run for several adapter sizes.
//!
//! `cargo run -p finalign --example comm_cost -- [rounds] [clients_per_round] [n_clients]`

use finalign::federation::{adapter_size, comm_cost, DEFAULT_BITS_PER_PARAM, REFERENCE_MODELS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let (rounds, k, n) = match args.as_slice() {
        [r, k, n, ..] => (*r, *k, *n),
        _ => (200, 3, 20),
    };

    let (_, params) = REFERENCE_MODELS[0];
    let size = adapter_size(params, DEFAULT_BITS_PER_PARAM);
    let report = comm_cost(size.bytes, rounds, k, n).with_rows(REFERENCE_MODELS.iter().copied(), DEFAULT_BITS_PER_PARAM);
    println!("{rounds} rounds, {k} uploads + {n} broadcasts per round ({}x adapter)\n", k + n);
    println!("{:<16} {:>14} {:>11} {:>13} {:>13}", "model", "params", "adapter MB", "per round MB", "total MB");
    for r in &report.rows {
        println!(
            "{:<16} {:>14} {:>11.4} {:>13.4} {:>13.1}",
            r.model, r.trainable_params, r.adapter_mb, r.per_round_mb, r.total_mb
        );
    }
    Ok(())
}
