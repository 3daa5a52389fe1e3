//! Assemble the chat prompt for each ablation, render a completion and parse
//! a free-text response back into ISINs.
//!
//! `cargo run -p finalign --example prompts`

use finalign::alignment::{KgSettings, PromptContext};
use finalign::data::{generate_with, parse_date, SynthConfig};
use finalign::prompt::{parse_response, render_completion, Ablation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate_with(7, &SynthConfig::default())?;
    let ctx = PromptContext::new(
        &ds,
        KgSettings {
            triple_cap: 60,
            ..KgSettings::default()
        },
    );
    let customer = &ds.profiles()[3].customer_id;
    let date = parse_date("2021-12-01")?;

    for ablation in [Ablation::Nothing, Ablation::PkgOnly, Ablation::MkgOnly, Ablation::Combined] {
        let inst = ctx.instance(customer, date, ablation)?;
        let chars: usize = inst.messages.iter().map(|m| m.content.len()).sum();
        println!("{:<9} {} messages, {chars} chars", ablation.label(), inst.messages.len());
    }

    let inst = ctx.instance(customer, date, Ablation::Combined)?;
    for m in &inst.messages {
        println!("\n[{:?}]\n{}", m.role, m.content);
    }

    let isins: Vec<String> = ds.isins().into_iter().take(3).collect();
    let completion = render_completion(&isins, "I recommend:")?;
    println!("\ncompletion:\n{completion}");
    assert_eq!(parse_response(&completion).isins, isins);
    let messy = format!("Sure! Consider these.\n- {}\n-   {}  \nThanks", isins[2], isins[0]);
    println!("parsed from free text: {:?}", parse_response(&messy).isins);
    Ok(())
}
