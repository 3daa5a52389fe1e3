//! Run configuration: one TOML document, every key optional except `[seeds]`.
//!
//! Dates are `YYYY-MM-DD`, quoted or bare. Unknown keys are errors.
//! Overrides use dotted paths, e.g. `federation.rounds=20`; the value is
//! parsed as a TOML value and falls back to a bare string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{CorpusConfig, KgSettings, DEFAULT_HORIZON_DAYS};
use crate::data::SynthConfig;
use crate::evaluation::TestSetConfig;
use crate::federation::{ClientMode, RoundConfig, Weighting, DEFAULT_BITS_PER_PARAM, DEFAULT_CONCENTRATION};
use crate::prompt::{Ablation, MAX_COMPLETION_ASSETS};
use crate::schedule::Schedule;
use crate::trainer::{Endpoint, LoraShape, DEFAULT_ETA};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("bad override {0:?}: expected key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Root seeds; every random choice derives from one of these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub clients: u64,
    pub assignment: u64,
    pub corpus: u64,
    pub federation: u64,
    pub adapter: u64,
    pub evaluation: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Directory of the four CSV files; defaults to `<run_dir>/data`.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub train: Schedule,
    pub test: Schedule,
    pub horizon_days: i64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            train: Schedule::training(),
            test: Schedule::test(),
            horizon_days: DEFAULT_HORIZON_DAYS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub max_assets: usize,
    pub ablation: Ablation,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            max_assets: MAX_COMPLETION_ASSETS,
            ablation: Ablation::Combined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationSection {
    pub n_clients: usize,
    pub mode: ClientMode,
    pub concentration: f64,
    pub rounds: usize,
    pub clients_per_round: usize,
    pub local_epoch_fraction: f64,
    pub weighting: Weighting,
    pub bits_per_param: u32,
}

impl Default for FederationSection {
    fn default() -> Self {
        let r = RoundConfig::default();
        Self {
            n_clients: r.n_clients,
            mode: ClientMode::NonIid,
            concentration: DEFAULT_CONCENTRATION,
            rounds: r.rounds,
            clients_per_round: r.clients_per_round,
            local_epoch_fraction: r.local_epoch_fraction,
            weighting: r.weighting,
            bits_per_param: DEFAULT_BITS_PER_PARAM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    #[default]
    Mock,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerSection {
    pub kind: TrainerKind,
    /// Mock step size.
    pub eta: f64,
    /// Required when `kind = "external"`.
    pub endpoint: Option<Endpoint>,
    pub timeout_secs: u64,
}

impl Default for TrainerSection {
    fn default() -> Self {
        Self {
            kind: TrainerKind::Mock,
            eta: DEFAULT_ETA,
            endpoint: None,
            timeout_secs: crate::trainer::DEFAULT_TIMEOUT.as_secs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    /// Built-in recommenders: `random`, `popularity`.
    pub baselines: Vec<String>,
    /// JSON-lines `{instance_id, response_text}` file to score.
    pub responses: Option<PathBuf>,
    /// Model label for the responses row.
    pub model_name: String,
    /// Data-ablation label for the responses row.
    pub responses_ablation: Ablation,
    pub popularity_cutoff_per_instance: bool,
    /// Customers need this many transactions before the first test tick.
    pub min_prior_transactions: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            baselines: vec!["random".into(), "popularity".into()],
            responses: None,
            model_name: "LLM".into(),
            responses_ablation: Ablation::Combined,
            popularity_cutoff_per_instance: true,
            min_prior_transactions: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every output.
    #[serde(default = "default_run_dir")]
    pub run_dir: PathBuf,
    pub seeds: Seeds,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub kg: KgSettings,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub federation: FederationSection,
    #[serde(default)]
    pub adapter: LoraShape,
    #[serde(default)]
    pub trainer: TrainerSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

fn default_run_dir() -> PathBuf {
    PathBuf::from("run")
}

impl RunConfig {
    /// Defaults with the given seeds.
    pub fn with_seeds(seeds: Seeds) -> Self {
        Self {
            run_dir: default_run_dir(),
            seeds,
            data: DataSection::default(),
            synth: SynthConfig::default(),
            kg: KgSettings::default(),
            schedule: ScheduleSection::default(),
            corpus: CorpusSection::default(),
            federation: FederationSection::default(),
            adapter: LoraShape::default(),
            trainer: TrainerSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut value = defaults_without_seeds();
        merge(&mut value, user);
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        for (_, v) in value.iter_mut() {
            dates_to_strings(v);
        }
        let cfg: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = &self.federation;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if f.n_clients == 0 || f.clients_per_round == 0 || f.clients_per_round > f.n_clients {
            return bad(format!(
                "federation: need 1 <= clients_per_round ({}) <= n_clients ({})",
                f.clients_per_round, f.n_clients
            ));
        }
        if !(f.local_epoch_fraction > 0.0 && f.local_epoch_fraction <= 1.0) {
            return bad("federation.local_epoch_fraction must be in (0, 1]".into());
        }
        if !(f.concentration > 0.0) {
            return bad("federation.concentration must be positive".into());
        }
        if self.trainer.kind == TrainerKind::External && self.trainer.endpoint.is_none() {
            return bad("trainer.endpoint is required for an external trainer".into());
        }
        if !(self.trainer.eta > 0.0) {
            return bad("trainer.eta must be positive".into());
        }
        for s in [&self.schedule.train, &self.schedule.test] {
            if s.step_days <= 0 || s.start > s.end {
                return bad(format!("schedule {}..{} step {} is empty", s.start, s.end, s.step_days));
            }
        }
        for b in &self.evaluation.baselines {
            if !matches!(b.as_str(), "random" | "popularity") {
                return bad(format!("unknown baseline {b:?}"));
            }
        }
        if self.corpus.max_assets == 0 || self.corpus.max_assets > MAX_COMPLETION_ASSETS {
            return bad(format!("corpus.max_assets must be in 1..={MAX_COMPLETION_ASSETS}"));
        }
        Ok(())
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data.dir.clone().unwrap_or_else(|| self.run_dir.join("data"))
    }

    pub fn corpus_config(&self) -> CorpusConfig {
        CorpusConfig {
            schedule: self.schedule.train,
            horizon_days: self.schedule.horizon_days,
            max_assets: self.corpus.max_assets,
            ablation: self.corpus.ablation,
            kg: self.kg.clone(),
        }
    }

    pub fn test_config(&self, ablation: Ablation) -> TestSetConfig {
        TestSetConfig {
            schedule: self.schedule.test,
            horizon_days: self.schedule.horizon_days,
            ablation,
            kg: self.kg.clone(),
        }
    }

    pub fn round_config(&self) -> RoundConfig {
        let f = &self.federation;
        RoundConfig {
            rounds: f.rounds,
            clients_per_round: f.clients_per_round,
            n_clients: f.n_clients,
            local_epoch_fraction: f.local_epoch_fraction,
            weighting: f.weighting,
            seed: self.seeds.federation,
        }
    }
}

fn zero_seeds() -> Seeds {
    Seeds {
        data: 0,
        clients: 0,
        assignment: 0,
        corpus: 0,
        federation: 0,
        adapter: 0,
        evaluation: 0,
    }
}

/// Every default as a table, minus `seeds`, so partial tables are completed.
fn defaults_without_seeds() -> toml::Table {
    let value = toml::Value::try_from(RunConfig::with_seeds(zero_seeds())).expect("config converts");
    let mut table = match value {
        toml::Value::Table(t) => t,
        _ => unreachable!("a struct converts to a table"),
    };
    table.remove("seeds");
    table
}

/// Deep-merge `over` into `base`; non-table values replace.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Bare TOML dates become `YYYY-MM-DD` strings.
fn dates_to_strings(v: &mut toml::Value) {
    match v {
        toml::Value::Datetime(d) => *v = toml::Value::String(d.to_string()),
        toml::Value::Table(t) => t.iter_mut().for_each(|(_, v)| dates_to_strings(v)),
        toml::Value::Array(a) => a.iter_mut().for_each(dates_to_strings),
        _ => {}
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Set `a.b.c=value` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let next = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(format!("{key}: {p} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_scalar(raw.trim()));
    Ok(())
}

/// Every accepted key with its default, one `key = value` per line.
pub fn documented_keys() -> Vec<String> {
    let mut cfg = RunConfig::with_seeds(zero_seeds());
    // Optional keys are shown with placeholder values.
    cfg.data.dir = Some(PathBuf::from("<run_dir>/data"));
    cfg.kg.mkg_extra_assets = Some(0);
    cfg.trainer.endpoint = Some(Endpoint::Command(vec!["<program>".into(), "<args>".into()]));
    cfg.evaluation.responses = Some(PathBuf::from("<responses.jsonl>"));
    let value = toml::Value::try_from(&cfg).expect("config converts");
    let mut out = Vec::new();
    flatten("", &value, &mut out);
    out
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, child) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        other => out.push(format!("{prefix} = {other}")),
    }
}
