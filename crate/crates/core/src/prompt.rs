//! Chat prompts, completion rendering and response parsing.
//!
//! A prompt is a system message, optional market and personal KG blocks, and
//! the user request, in that order. Template text is fixed; only the
//! `{MARKET_KNOWLEDGE_GRAPH}`, `{PERSONAL_KNOWLEDGE_GRAPH}` and
//! `{RECOMMENDATION_DATE}` placeholders are substituted.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SYSTEM_TEMPLATE: &str = "You are an expert financial analyst AI. Your task is to analyze a user's transaction history and supplementary market data to provide personalized asset recommendations. The user will ask for recommendations for the next 180 days from a given \"current date\".

You MUST provide your response in the following format, and only this format:

[An introductory sentence]
- [ASSET_ISIN_1]
- [ASSET_ISIN_2]
- [ASSET_ISIN_3]";

pub const MKG_TEMPLATE: &str = "Here is the supplementary knowledge graph with asset information and historical prices in JSON-LD format:

```jsonld
{MARKET_KNOWLEDGE_GRAPH}
```";

pub const PKG_TEMPLATE: &str = "Here is the user's transaction history in JSON-LD format:

```jsonld
{PERSONAL_KNOWLEDGE_GRAPH}
```";

pub const USER_REQUEST_TEMPLATE: &str = "Considering all the provided data, and assuming the current date is {RECOMMENDATION_DATE}, please provide a list of asset recommendations for my portfolio for the next 6 months.";

/// Intro line for generated completions.
pub const DEFAULT_INTRO: &str = "Based on your history, I recommend:";

/// Most assets a completion may list.
pub const MAX_COMPLETION_ASSETS: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("ablation {ablation} requires pkg={needs_pkg} mkg={needs_mkg}, got pkg={has_pkg} mkg={has_mkg}")]
    AblationMismatch {
        ablation: Ablation,
        needs_pkg: bool,
        needs_mkg: bool,
        has_pkg: bool,
        has_mkg: bool,
    },
    #[error("a completion lists 1..={max} assets, got {got}")]
    TooManyAssets { got: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    fn new(role: Role, content: String) -> Self {
        debug_assert!(!content.is_empty());
        Self { role, content }
    }
}

/// Which KG blocks a prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Ablation {
    #[default]
    Combined,
    PkgOnly,
    MkgOnly,
    Nothing,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Combined, Ablation::PkgOnly, Ablation::MkgOnly, Ablation::Nothing];

    pub fn uses_pkg(self) -> bool {
        matches!(self, Ablation::Combined | Ablation::PkgOnly)
    }

    pub fn uses_mkg(self) -> bool {
        matches!(self, Ablation::Combined | Ablation::MkgOnly)
    }

    /// Row label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Ablation::Combined => "Combined",
            Ablation::PkgOnly => "PKG",
            Ablation::MkgOnly => "MKG",
            Ablation::Nothing => "Nothing",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "combined" => Ok(Ablation::Combined),
            "pkg" | "pkgonly" | "pkg-only" => Ok(Ablation::PkgOnly),
            "mkg" | "mkgonly" | "mkg-only" => Ok(Ablation::MkgOnly),
            "nothing" | "none" => Ok(Ablation::Nothing),
            other => Err(format!("unknown ablation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub customer_id: String,
    pub recommendation_date: NaiveDate,
    pub ablation: Ablation,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedRecommendation {
    pub isins: Vec<String>,
}

/// Assemble the chat messages for one recommendation request.
pub fn build_messages(
    pkg_doc: Option<&str>,
    mkg_doc: Option<&str>,
    recommendation_date: NaiveDate,
    ablation: Ablation,
) -> Result<Vec<ChatMessage>, PromptError> {
    if pkg_doc.is_some() != ablation.uses_pkg() || mkg_doc.is_some() != ablation.uses_mkg() {
        return Err(PromptError::AblationMismatch {
            ablation,
            needs_pkg: ablation.uses_pkg(),
            needs_mkg: ablation.uses_mkg(),
            has_pkg: pkg_doc.is_some(),
            has_mkg: mkg_doc.is_some(),
        });
    }
    let mut messages = vec![ChatMessage::new(Role::System, SYSTEM_TEMPLATE.to_string())];
    if let Some(doc) = mkg_doc {
        messages.push(ChatMessage::new(
            Role::User,
            MKG_TEMPLATE.replace("{MARKET_KNOWLEDGE_GRAPH}", doc),
        ));
    }
    if let Some(doc) = pkg_doc {
        messages.push(ChatMessage::new(
            Role::User,
            PKG_TEMPLATE.replace("{PERSONAL_KNOWLEDGE_GRAPH}", doc),
        ));
    }
    messages.push(ChatMessage::new(
        Role::User,
        USER_REQUEST_TEMPLATE.replace(
            "{RECOMMENDATION_DATE}",
            &recommendation_date.format("%Y-%m-%d").to_string(),
        ),
    ));
    Ok(messages)
}

/// Intro line followed by one `- ISIN` line per asset.
pub fn render_completion<S: AsRef<str>>(isins: &[S], intro: &str) -> Result<String, PromptError> {
    if isins.is_empty() || isins.len() > MAX_COMPLETION_ASSETS {
        return Err(PromptError::TooManyAssets {
            got: isins.len(),
            max: MAX_COMPLETION_ASSETS,
        });
    }
    let mut out = String::from(intro);
    for isin in isins {
        out.push_str("\n- ");
        out.push_str(isin.as_ref());
    }
    Ok(out)
}

/// Extract ISINs from `- ` bullet lines, keeping the first occurrence of each.
///
/// Never fails: text without bullets yields an empty list.
pub fn parse_response(text: &str) -> ParsedRecommendation {
    let mut seen = HashSet::new();
    let isins = text
        .lines()
        .filter_map(|line| line.trim_start().strip_prefix("- "))
        .filter_map(|rest| rest.split_whitespace().next())
        .map(|tok| tok.trim_matches(|c: char| !c.is_ascii_alphanumeric()))
        .filter(|tok| !tok.is_empty())
        .filter(|tok| seen.insert(tok.to_string()))
        .map(str::to_string)
        .collect();
    ParsedRecommendation { isins }
}
