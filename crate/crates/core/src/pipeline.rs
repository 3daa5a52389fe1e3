//! Command implementations behind the `finalign` binary.
//!
//! Every command writes under `run_dir` and then refreshes
//! `run_dir/manifest.json`, a sorted map from relative path to SHA-256 of
//! every output file. Outputs carry no timestamps, so identical configs and
//! seeds give identical manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{build_training_corpus, client_file_name, write_corpus, AlignmentError, CorpusStats, PromptContext};
use crate::config::{ConfigError, RunConfig, TrainerKind};
use crate::data::{generate_with, load_dataset, save_dataset, DataError, Dataset, DatasetPaths, TxType};
use crate::evaluation::{
    build_test_set, evaluate, plot_data_csv, results_csv, EvalError, Evaluation, PopularityBaseline, RandomBaseline,
    Recommender, ResponsesRecommender, ResultRow, TestInstance,
};
use crate::federation::{
    adapter_size, assign_users, comm_cost, make_clients, run_rounds, ClientCorpus, CommReport, FederationError,
    RoundLog, REFERENCE_MODELS,
};
use crate::kg::{to_jsonld, KgError};
use crate::prompt::Ablation;
use crate::seed::sha256_hex;
use crate::trainer::{save_adapter, toy_adapter, ExternalTrainer, FlatError, MockTrainer, Trainer};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Flat(#[from] FlatError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Missing(String),
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
    }
    fs::write(path, contents).map_err(io_at(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("output serialises");
    text.push('\n');
    write_file(path, text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::Missing(format!("{what} not found at {} ({e})", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Missing(format!("{}: {e}", path.display())))
}

fn files_under(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            files_under(root, &path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Recompute `manifest.json` from the files currently under `run_dir`.
pub fn refresh_manifest(run_dir: &Path) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut files = Vec::new();
    files_under(run_dir, run_dir, &mut files).map_err(io_at(run_dir))?;
    let mut manifest = BTreeMap::new();
    for f in files {
        let rel = f.strip_prefix(run_dir).expect("under run_dir");
        let key = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if key == MANIFEST || key.starts_with("federation/scratch/") {
            continue;
        }
        let bytes = fs::read(&f).map_err(io_at(&f))?;
        manifest.insert(key, sha256_hex(&bytes));
    }
    write_json(&run_dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// The effective config without location keys, so runs in different
/// directories compare equal.
fn record_config(cfg: &RunConfig) -> Result<(), PipelineError> {
    let mut value = toml::Value::try_from(cfg).expect("config converts");
    if let Some(t) = value.as_table_mut() {
        t.remove("run_dir");
        t.remove("data");
        if let Some(e) = t.get_mut("evaluation").and_then(toml::Value::as_table_mut) {
            e.remove("responses");
        }
    }
    write_file(&cfg.run_dir.join("config.toml"), toml::to_string(&value).expect("config serialises"))
}

fn load(cfg: &RunConfig) -> Result<Dataset, PipelineError> {
    let dir = cfg.data_dir();
    if !dir.is_dir() {
        return Err(PipelineError::Missing(format!(
            "data directory {} does not exist; run `synth` or set data.dir",
            dir.display()
        )));
    }
    Ok(load_dataset(&DatasetPaths::in_dir(&dir))?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub transactions: usize,
    pub buys: usize,
    pub sells: usize,
    pub price_bars: usize,
    pub assets: usize,
    pub profiles: usize,
    pub first_price: Option<NaiveDate>,
    pub last_price: Option<NaiveDate>,
}

impl DatasetSummary {
    pub fn of(d: &Dataset) -> Self {
        let buys = d.transactions().iter().filter(|t| t.tx_type == TxType::Buy).count();
        let range = d.date_range();
        Self {
            transactions: d.transactions().len(),
            buys,
            sells: d.transactions().len() - buys,
            price_bars: d.prices().len(),
            assets: d.assets().len(),
            profiles: d.profiles().len(),
            first_price: range.map(|r| r.0),
            last_price: range.map(|r| r.1),
        }
    }
}

/// Generate the synthetic dataset into the data directory.
pub fn cmd_synth(cfg: &RunConfig) -> Result<DatasetSummary, PipelineError> {
    let dataset = generate_with(cfg.seeds.data, &cfg.synth)?;
    let dir = cfg.data_dir();
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    save_dataset(&dataset, &DatasetPaths::in_dir(&dir))?;
    record_config(cfg)?;
    refresh_manifest(&cfg.run_dir)?;
    Ok(DatasetSummary::of(&dataset))
}

/// Load and validate the data directory; write `ingest.json`.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<DatasetSummary, PipelineError> {
    let dataset = load(cfg)?;
    let summary = DatasetSummary::of(&dataset);
    write_json(&cfg.run_dir.join("ingest.json"), &summary)?;
    refresh_manifest(&cfg.run_dir)?;
    Ok(summary)
}

/// Which (customer, date) instances `build-kg` renders.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KgSelection {
    /// Empty selects every customer.
    pub customers: Vec<String>,
    /// Empty selects the test schedule.
    pub dates: Vec<NaiveDate>,
    pub ablation: Ablation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgFileSummary {
    pub instance_id: String,
    pub pkg_triples: usize,
    pub mkg_triples: usize,
}

/// Write capped PKG/MKG JSON-LD and the chat prompt per selected instance.
pub fn cmd_build_kg(cfg: &RunConfig, selection: &KgSelection) -> Result<Vec<KgFileSummary>, PipelineError> {
    use rayon::prelude::*;
    let dataset = load(cfg)?;
    let customers: Vec<String> = if selection.customers.is_empty() {
        dataset.customer_ids().map(str::to_string).collect()
    } else {
        selection.customers.clone()
    };
    let dates = if selection.dates.is_empty() {
        cfg.schedule.test.ticks()
    } else {
        selection.dates.clone()
    };
    let ctx = PromptContext::new(&dataset, cfg.kg.clone());
    let work: Vec<(&str, NaiveDate)> = customers
        .iter()
        .flat_map(|c| dates.iter().map(move |d| (c.as_str(), *d)))
        .collect();
    let kg_dir = cfg.run_dir.join("kg");
    let prompt_dir = cfg.run_dir.join("prompts");
    let summaries = work
        .par_iter()
        .map(|&(customer, date)| {
            let id = crate::evaluation::instance_id(customer, date);
            let (pkg, mkg) = ctx.graphs(customer, date, selection.ablation)?;
            let instance = ctx
                .instance(customer, date, selection.ablation)
                .map_err(|e| PipelineError::Missing(e.to_string()))?;
            if selection.ablation.uses_pkg() {
                write_file(&kg_dir.join(format!("{id}.pkg.jsonld")), to_jsonld(&pkg))?;
            }
            if selection.ablation.uses_mkg() {
                write_file(&kg_dir.join(format!("{id}.mkg.jsonld")), to_jsonld(&mkg))?;
            }
            write_json(&prompt_dir.join(format!("{id}.json")), &instance.messages)?;
            Ok(KgFileSummary {
                instance_id: id,
                pkg_triples: pkg.len(),
                mkg_triples: mkg.len(),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    write_json(&kg_dir.join("index.json"), &summaries)?;
    refresh_manifest(&cfg.run_dir)?;
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub client_id: usize,
    /// Relative to the corpus directory.
    pub file: String,
    pub examples: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub stats: CorpusStats,
    /// `label_true == label_false`.
    pub even_split: bool,
    pub files: Vec<CorpusFile>,
}

/// Build clients, the user assignment and the per-client corpora.
pub fn cmd_build_corpus(cfg: &RunConfig) -> Result<CorpusManifest, PipelineError> {
    let dataset = load(cfg)?;
    let f = &cfg.federation;
    let clients = make_clients(f.n_clients, f.mode, f.concentration, cfg.seeds.clients)?;
    let assignment = assign_users(dataset.profiles(), &clients, cfg.seeds.assignment)?;
    let corpus = build_training_corpus(&dataset, &assignment, &cfg.corpus_config(), cfg.seeds.corpus)?;
    let dir = cfg.run_dir.join("corpus");
    let written = write_corpus(&corpus, &dir).map_err(io_at(&dir))?;
    let files = written
        .iter()
        .map(|c| {
            let bytes = fs::read(&c.path).map_err(io_at(&c.path))?;
            Ok(CorpusFile {
                client_id: c.client_id,
                file: client_file_name(c.client_id),
                examples: c.examples,
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let stats = corpus.stats();
    let manifest = CorpusManifest {
        even_split: stats.label_true == stats.label_false,
        stats,
        files,
    };
    write_json(&cfg.run_dir.join("federation").join("clients.json"), &clients)?;
    write_json(&dir.join("assignment.json"), &assignment)?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    record_config(cfg)?;
    refresh_manifest(&cfg.run_dir)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederateSummary {
    pub rounds: usize,
    pub initial_digest: String,
    pub final_digest: String,
    pub participation: Vec<usize>,
    pub comm: CommReport,
}

fn make_trainer(cfg: &RunConfig) -> Result<Box<dyn Trainer>, PipelineError> {
    Ok(match cfg.trainer.kind {
        TrainerKind::Mock => Box::new(MockTrainer::new(cfg.trainer.eta)),
        TrainerKind::External => {
            let endpoint = cfg
                .trainer
                .endpoint
                .clone()
                .ok_or_else(|| PipelineError::Missing("trainer.endpoint".into()))?;
            Box::new(ExternalTrainer::new(endpoint, Duration::from_secs(cfg.trainer.timeout_secs)))
        }
    })
}

fn write_round_logs(path: &Path, logs: &[RoundLog]) -> Result<(), PipelineError> {
    let mut text = String::new();
    for l in logs {
        text.push_str(&serde_json::to_string(l).expect("log serialises"));
        text.push('\n');
    }
    write_file(path, text)
}

/// Run the federated rounds over a built corpus.
pub fn cmd_federate(cfg: &RunConfig) -> Result<FederateSummary, PipelineError> {
    let corpus_dir = cfg.run_dir.join("corpus");
    let manifest: CorpusManifest = read_json(&corpus_dir.join("manifest.json"), "corpus manifest (run build-corpus)")?;
    let corpora: Vec<ClientCorpus> = manifest
        .files
        .iter()
        .map(|f| ClientCorpus {
            client_id: f.client_id,
            path: corpus_dir.join(&f.file),
            examples: f.examples,
        })
        .collect();
    let out = cfg.run_dir.join("federation");
    let initial = toy_adapter(&cfg.adapter, cfg.seeds.adapter);
    save_adapter(&initial, &out.join("initial_adapter.flat"))?;

    let trainer = make_trainer(cfg)?;
    let scratch = out.join("scratch");
    let result = run_rounds(&cfg.round_config(), &corpora, trainer.as_ref(), &initial, &scratch);
    let _ = fs::remove_dir_all(&scratch);
    let outcome = match result {
        Ok(o) => o,
        Err(FederationError::TrainerFailure(failure)) => {
            write_round_logs(&out.join("rounds.jsonl"), &failure.logs)?;
            refresh_manifest(&cfg.run_dir)?;
            return Err(FederationError::TrainerFailure(failure).into());
        }
        Err(e) => return Err(e.into()),
    };
    write_round_logs(&out.join("rounds.jsonl"), &outcome.logs)?;
    save_adapter(&outcome.final_adapter, &out.join("final_adapter.flat"))?;

    let f = &cfg.federation;
    let size = adapter_size(cfg.adapter.param_count() as u64, f.bits_per_param);
    let comm = comm_cost(size.bytes, f.rounds as u64, f.clients_per_round as u64, f.n_clients as u64)
        .with_rows(REFERENCE_MODELS, f.bits_per_param);
    write_json(&out.join("comm_report.json"), &comm)?;
    write_file(&out.join("comm_report.csv"), comm.to_csv())?;

    let mut participation = vec![0; f.n_clients];
    for l in &outcome.logs {
        for c in &l.selected_clients {
            participation[*c] += 1;
        }
    }
    let summary = FederateSummary {
        rounds: outcome.logs.len(),
        initial_digest: sha256_hex(&initial.to_bytes()),
        final_digest: sha256_hex(&outcome.final_adapter.to_bytes()),
        participation,
        comm,
    };
    write_json(&out.join("summary.json"), &summary)?;
    record_config(cfg)?;
    refresh_manifest(&cfg.run_dir)?;
    Ok(summary)
}

/// Test instances on the configured schedule, with cheap prompts: scoring
/// reads only the outcome sets.
pub fn test_instances(cfg: &RunConfig, dataset: &Dataset) -> Result<Vec<TestInstance>, PipelineError> {
    let first = cfg.schedule.test.start;
    let min = cfg.evaluation.min_prior_transactions;
    let eligible = |p: &crate::data::CustomerProfile| {
        dataset.transactions_of(&p.customer_id).filter(|t| t.timestamp < first).count() >= min
    };
    Ok(build_test_set(dataset, &cfg.test_config(Ablation::Nothing), Some(&eligible))?)
}

/// Score the configured baselines and, if given, a responses file.
pub fn cmd_evaluate(cfg: &RunConfig, responses: Option<&Path>) -> Result<Vec<ResultRow>, PipelineError> {
    let responses = responses.map(Path::to_path_buf).or_else(|| cfg.evaluation.responses.clone());
    let external = match &responses {
        Some(path) => Some(ResponsesRecommender::from_file(cfg.evaluation.model_name.clone(), path)?),
        None => None,
    };
    let dataset = load(cfg)?;
    let instances = test_instances(cfg, &dataset)?;
    if instances.is_empty() {
        return Err(PipelineError::Missing("no test instances".into()));
    }

    let mut runs: Vec<(Evaluation, String)> = Vec::new();
    for b in &cfg.evaluation.baselines {
        let rec: Box<dyn Recommender> = match b.as_str() {
            "random" => Box::new(RandomBaseline::new(&dataset.isins(), cfg.seeds.evaluation)?),
            "popularity" => Box::new(PopularityBaseline::new(
                &dataset,
                cfg.evaluation.popularity_cutoff_per_instance,
            )),
            other => return Err(ConfigError::Invalid(format!("unknown baseline {other:?}")).into()),
        };
        runs.push((evaluate(rec.as_ref(), &instances), "-".into()));
    }
    if let Some(rec) = &external {
        runs.push((evaluate(rec, &instances), cfg.evaluation.responses_ablation.label().into()));
    }

    let out = cfg.run_dir.join("evaluation");
    let rows: Vec<ResultRow> = runs.iter().map(|(e, data)| ResultRow::new(e, data.clone())).collect();
    write_file(&out.join("results.csv"), results_csv(&rows))?;
    write_json(&out.join("results.json"), &rows)?;
    write_file(&out.join("plot_data.csv"), plot_data_csv(&rows))?;
    let test_set: Vec<_> = instances
        .iter()
        .map(|i| serde_json::json!({ "instance_id": i.instance_id, "outcomes": i.outcomes }))
        .collect();
    write_json(&out.join("test_set.json"), &test_set)?;
    for (e, _) in &runs {
        let mut text = String::new();
        for s in &e.instances {
            text.push_str(&serde_json::to_string(s).expect("score serialises"));
            text.push('\n');
        }
        write_file(&out.join(format!("scores_{}.jsonl", e.recommender.to_lowercase())), text)?;
    }
    refresh_manifest(&cfg.run_dir)?;
    Ok(rows)
}

/// Summarise whatever stages have run into `report.md`.
pub fn cmd_report(cfg: &RunConfig) -> Result<String, PipelineError> {
    let run = &cfg.run_dir;
    let mut md = String::from("# Run report\n");
    if let Ok(s) = read_json::<DatasetSummary>(&run.join("ingest.json"), "ingest") {
        md.push_str(&format!(
            "\n## Data\n\n{} transactions ({} buys, {} sells), {} price bars, {} assets, {} customers.\n",
            s.transactions, s.buys, s.sells, s.price_bars, s.assets, s.profiles
        ));
    }
    if let Ok(m) = read_json::<CorpusManifest>(&run.join("corpus/manifest.json"), "corpus") {
        let s = &m.stats;
        md.push_str(&format!(
            "\n## Corpus\n\n{} prompts, {} examples: {} label-true, {} label-false ({} complete pairs). Even split: {}.\n\nPer-client sizes: {:?}\n",
            s.prompts, s.examples, s.label_true, s.label_false, s.complete_pairs, m.even_split, s.per_client
        ));
    }
    if let Ok(f) = read_json::<FederateSummary>(&run.join("federation/summary.json"), "federation") {
        md.push_str(&format!(
            "\n## Federation\n\n{} rounds. Final adapter sha256 `{}`.\n\nParticipation per client: {:?}\n\n| Model | Trainable parameters | Adapter MB | Per-round MB | Total MB |\n|---|---:|---:|---:|---:|\n",
            f.rounds, f.final_digest, f.participation
        ));
        for r in &f.comm.rows {
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                r.model, r.trainable_params, r.adapter_mb, r.per_round_mb, r.total_mb
            ));
        }
    }
    if let Ok(rows) = read_json::<Vec<ResultRow>>(&run.join("evaluation/results.json"), "evaluation") {
        md.push_str("\n## Evaluation\n\n| Model | Data | Pref@3 | Prof@3 | Comb@3 |\n|---|---|---|---|---|\n");
        for r in &rows {
            let cells: Vec<String> = r
                .metrics
                .iter()
                .map(|m| format!("{:.4} ± {:.4} (n={})", m.mean, m.stderr, m.n))
                .collect();
            md.push_str(&format!("| {} | {} | {} |\n", r.model, r.data, cells.join(" | ")));
        }
    }
    write_file(&run.join("report.md"), &md)?;
    refresh_manifest(run)?;
    Ok(md)
}
