//! Build a customer's PKG and the MKG at a cutoff, cap them jointly and
//! print the JSON-LD.
//!
//! `cargo run -p finalign --example knowledge_graph -- [cap] [YYYY-MM-DD]`

use finalign::alignment::{KgSettings, PromptContext};
use finalign::data::{generate_with, parse_date, SynthConfig};
use finalign::prompt::Ablation;
use finalign::kg::{build_mkg, build_pkg, cap_triples_report, from_jsonld, to_jsonld, GraphKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let cap: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1500);
    let cutoff = parse_date(&args.next().unwrap_or_else(|| "2021-12-01".into()))?;

    let ds = generate_with(7, &SynthConfig::default())?;
    let customer = ds.profiles()[0].customer_id.clone();
    let pkg = build_pkg(&ds, &customer, cutoff)?;
    let mkg = build_mkg(&ds, cutoff, None);
    let report = cap_triples_report(&pkg, &mkg, cap);
    println!("{customer} at {cutoff}: PKG {} + MKG {} triples, cap {cap}", pkg.len(), mkg.len());
    // PKG entities go first, so capping against the full market drops them all.
    println!(
        "full MKG capped: kept PKG {} + MKG {} ({} entities removed)",
        report.pkg.len(),
        report.mkg.len(),
        report.removed.len()
    );

    // The prompt builder always includes the customer's traded assets and adds
    // others only while the budget left by the PKG allows.
    let ctx = PromptContext::new(
        &ds,
        KgSettings {
            triple_cap: cap,
            ..KgSettings::default()
        },
    );
    let (pkg, mkg) = ctx.graphs(&customer, cutoff, Ablation::Combined)?;
    println!("budgeted:        kept PKG {} + MKG {}", pkg.len(), mkg.len());

    let doc = to_jsonld(&pkg);
    assert_eq!(from_jsonld(&doc, GraphKind::Pkg)?, pkg);
    let preview: String = doc.lines().skip_while(|l| !l.contains("@graph")).take(30).collect::<Vec<_>>().join("\n");
    println!("\nPKG JSON-LD graph (first 30 lines):\n{preview}");
    let mkg_doc = to_jsonld(&mkg);
    let preview: String = mkg_doc.lines().take(25).collect::<Vec<_>>().join("\n");
    println!("\nMKG JSON-LD (first 25 lines):\n{preview}");
    Ok(())
}
