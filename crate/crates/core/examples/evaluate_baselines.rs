//! Build the held-out test set and score the Random, Popularity and Oracle
//! recommenders with Hits@3.
//!
//! `cargo run -p finalign --example evaluate_baselines -- [seed]`

use finalign::alignment::KgSettings;
use finalign::data::{generate_with, SynthConfig};
use finalign::evaluation::{
    build_test_set, evaluate, OracleRecommender, PopularityBaseline, RandomBaseline, Recommender, TestSetConfig,
};
use finalign::prompt::Ablation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(29);
    let ds = generate_with(7, &SynthConfig::default())?;
    // Scoring reads only outcome sets, so skip the graphs.
    let cfg = TestSetConfig {
        ablation: Ablation::Nothing,
        kg: KgSettings::default(),
        ..TestSetConfig::default()
    };
    let instances = build_test_set(&ds, &cfg, None)?;
    println!("{} test instances\n", instances.len());

    let recommenders: Vec<Box<dyn Recommender>> = vec![
        Box::new(RandomBaseline::new(&ds.isins(), seed)?),
        Box::new(PopularityBaseline::new(&ds, true)),
        Box::new(OracleRecommender),
    ];
    println!("{:<11} {:>18} {:>18} {:>18}", "model", "Pref@3", "Prof@3", "Comb@3");
    for rec in &recommenders {
        let e = evaluate(rec.as_ref(), &instances);
        let cells: Vec<String> = e.metrics.iter().map(|m| format!("{:.3} ± {:.3}", m.mean, m.stderr)).collect();
        println!("{:<11} {:>18} {:>18} {:>18}", e.recommender, cells[0], cells[1], cells[2]);
    }
    Ok(())
}
