//! Generate the seeded synthetic desk dataset and write it as CSV.
//!
//! `cargo run -p finalign --example synth_dataset -- [out_dir] [seed]`

use finalign::data::{generate_with, load_dataset, save_dataset, DatasetPaths, SynthConfig, TxType};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "target/example-data".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let ds = generate_with(seed, &SynthConfig::default())?;
    let paths = DatasetPaths::in_dir(&out);
    save_dataset(&ds, &paths)?;
    // Loading validates the files just written.
    let back = load_dataset(&paths)?;
    assert_eq!(back, ds);

    let buys = ds.transactions().iter().filter(|t| t.tx_type == TxType::Buy).count();
    let (first, last) = ds.date_range().expect("non-empty dataset");
    println!("seed {seed} -> {out}");
    println!("  customers    {}", ds.profiles().len());
    println!("  assets       {}", ds.assets().len());
    println!("  price bars   {} ({first} .. {last})", ds.prices().len());
    println!("  transactions {} ({buys} buys)", ds.transactions().len());
    Ok(())
}
