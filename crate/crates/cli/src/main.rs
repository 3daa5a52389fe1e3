use std::io::{self, BufReader};
use std::net::TcpListener;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use finalign::config::{documented_keys, RunConfig};
use finalign::data::parse_date;
use finalign::pipeline::{self, KgSelection};
use finalign::prompt::Ablation;
use finalign::trainer::{serve, serve_tcp, ServeMode, DEFAULT_ETA};

#[derive(Parser, Debug)]
#[command(name = "finalign", version, about = "Knowledge-graph grounded recommendation harness")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set federation.rounds=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate the synthetic dataset into the data directory.
    Synth,
    /// Load and validate the data directory.
    Ingest,
    /// Write capped PKG/MKG JSON-LD and prompts per instance.
    BuildKg {
        /// Customer id; repeatable. Defaults to every customer.
        #[arg(long = "customer")]
        customers: Vec<String>,
        /// Recommendation date; repeatable. Defaults to the test schedule.
        #[arg(long = "date")]
        dates: Vec<String>,
        #[arg(long, default_value = "combined")]
        ablation: String,
    },
    /// Build clients, the user assignment and per-client corpora.
    BuildCorpus,
    /// Run the federated rounds.
    Federate,
    /// Score baselines and an optional responses file.
    Evaluate {
        /// JSON-lines `{instance_id, response_text}` file.
        #[arg(long)]
        responses: Option<PathBuf>,
    },
    /// Summarise the run directory into report.md.
    Report,
    /// Serve the trainer protocol on stdin/stdout or a TCP address.
    ServeTrainer {
        #[arg(long, value_enum, default_value_t = Mode::Echo)]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
        /// `host:port`; stdin/stdout when absent.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Echo,
    Mock,
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn parse_cli() -> Cli {
    let mut keys = String::from("Config keys (defaults shown; `[seeds]` is required):\n");
    for k in documented_keys() {
        keys.push_str("  ");
        keys.push_str(&k);
        keys.push('\n');
    }
    let matches = Cli::command().after_help(keys).get_matches();
    Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = parse_cli();
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }

    if let Cmd::ServeTrainer { mode, eta, listen } = &cli.command {
        let mode = match mode {
            Mode::Echo => ServeMode::Echo,
            Mode::Mock => ServeMode::Mock { eta: *eta },
        };
        return match listen {
            Some(addr) => {
                let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on {}", listener.local_addr()?);
                Ok(serve_tcp(mode, listener)?)
            }
            None => Ok(serve(mode, BufReader::new(io::stdin().lock()), io::stdout().lock())?),
        };
    }

    let Some(path) = &cli.config else {
        bail!("--config is required for this command");
    };
    let cfg = RunConfig::load(path, &cli.overrides).with_context(|| format!("loading {}", path.display()))?;

    match &cli.command {
        Cmd::Synth => print_json(&pipeline::cmd_synth(&cfg)?),
        Cmd::Ingest => print_json(&pipeline::cmd_ingest(&cfg)?),
        Cmd::BuildKg {
            customers,
            dates,
            ablation,
        } => {
            let ablation: Ablation = ablation.parse().map_err(anyhow::Error::msg)?;
            let dates = dates
                .iter()
                .map(|d| parse_date(d).map_err(anyhow::Error::msg))
                .collect::<Result<Vec<_>>>()?;
            let selection = KgSelection {
                customers: customers.clone(),
                dates,
                ablation,
            };
            let written = pipeline::cmd_build_kg(&cfg, &selection)?;
            println!("wrote {} instances under {}", written.len(), cfg.run_dir.display());
            Ok(())
        }
        Cmd::BuildCorpus => print_json(&pipeline::cmd_build_corpus(&cfg)?),
        Cmd::Federate => print_json(&pipeline::cmd_federate(&cfg)?),
        Cmd::Evaluate { responses } => {
            let rows = pipeline::cmd_evaluate(&cfg, responses.as_deref())?;
            print!("{}", finalign::evaluation::results_csv(&rows));
            Ok(())
        }
        Cmd::Report => {
            print!("{}", pipeline::cmd_report(&cfg)?);
            Ok(())
        }
        Cmd::ServeTrainer { .. } => unreachable!("handled above"),
    }
}
