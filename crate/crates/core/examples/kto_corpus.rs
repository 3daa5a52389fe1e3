//! Partition customers over heterogeneous clients and build the per-client
//! binary-labelled corpora.
//!
//! `cargo run -p finalign --example kto_corpus -- [iid|noniid] [out_dir]`

use finalign::alignment::{build_training_corpus, write_corpus, CorpusConfig, KgSettings};
use finalign::data::{generate_with, SynthConfig};
use finalign::federation::{assign_users, make_clients, ClientMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mode = match args.next().as_deref() {
        Some("iid") => ClientMode::Iid,
        _ => ClientMode::NonIid,
    };
    let out = args.next().unwrap_or_else(|| "target/example-corpus".into());

    let ds = generate_with(7, &SynthConfig::default())?;
    let clients = make_clients(20, mode, 0.3, 11)?;
    let assignment = assign_users(ds.profiles(), &clients, 13)?;
    println!("{mode:?} assignment, customers per client: {:?}", assignment.counts());

    let cfg = CorpusConfig {
        kg: KgSettings {
            triple_cap: 300,
            ..KgSettings::default()
        },
        ..CorpusConfig::default()
    };
    let corpus = build_training_corpus(&ds, &assignment, &cfg, 17)?;
    let s = corpus.stats();
    println!(
        "{} prompts -> {} examples ({} true, {} false)",
        s.prompts, s.examples, s.label_true, s.label_false
    );
    let files = write_corpus(&corpus, std::path::Path::new(&out))?;
    for f in files.iter().filter(|f| f.examples > 0).take(5) {
        println!("  client {:02}: {} examples in {}", f.client_id, f.examples, f.path.display());
    }
    if let Some(ex) = corpus.clients.iter().flatten().next() {
        println!("\nfirst example: label {}, completion:\n{}", ex.label, ex.completion);
    }
    Ok(())
}
