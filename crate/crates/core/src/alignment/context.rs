//! Per-instance KG context: PKG + budgeted MKG, capped and serialised into
//! chat messages.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::kg::{
    build_mkg_from, build_pkg, cap_triples, select_mkg_assets, to_jsonld, GraphKind, KgError,
    KnowledgeGraph, MarketSummaries, DEFAULT_TRIPLE_CAP, SUMMARY_WINDOW_DAYS,
};
use crate::prompt::{build_messages, Ablation, PromptError, PromptInstance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KgSettings {
    /// Joint PKG + MKG triple budget.
    pub triple_cap: usize,
    /// Price summary window length in calendar days.
    pub window_days: i64,
    /// Upper bound on MKG assets added beyond the customer's own.
    pub mkg_extra_assets: Option<usize>,
}

impl Default for KgSettings {
    fn default() -> Self {
        Self {
            triple_cap: DEFAULT_TRIPLE_CAP,
            window_days: SUMMARY_WINDOW_DAYS,
            mkg_extra_assets: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ContextError {
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Builds prompt instances over one dataset, caching price summaries.
pub struct PromptContext<'a> {
    dataset: &'a Dataset,
    summaries: MarketSummaries,
    settings: KgSettings,
}

impl<'a> PromptContext<'a> {
    pub fn new(dataset: &'a Dataset, settings: KgSettings) -> Self {
        let summaries = MarketSummaries::with_window(dataset, settings.window_days, None);
        Self {
            dataset,
            summaries,
            settings,
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    /// The capped PKG/MKG pair for `customer_id` at `cutoff`. Graphs the
    /// ablation does not use are empty.
    pub fn graphs(
        &self,
        customer_id: &str,
        cutoff: NaiveDate,
        ablation: Ablation,
    ) -> Result<(KnowledgeGraph, KnowledgeGraph), KgError> {
        let pkg = if ablation.uses_pkg() {
            build_pkg(self.dataset, customer_id, cutoff)?
        } else {
            if self.dataset.profile(customer_id).is_none() {
                return Err(KgError::UnknownCustomer(customer_id.to_string()));
            }
            KnowledgeGraph::new(GraphKind::Pkg)
        };
        let mkg = if ablation.uses_mkg() {
            let budget = self.settings.triple_cap.saturating_sub(pkg.len());
            let assets = select_mkg_assets(
                self.dataset,
                &self.summaries,
                customer_id,
                cutoff,
                budget,
                self.settings.mkg_extra_assets,
            );
            build_mkg_from(&self.summaries, self.dataset, cutoff, Some(&assets))
        } else {
            KnowledgeGraph::new(GraphKind::Mkg)
        };
        Ok(cap_triples(&pkg, &mkg, self.settings.triple_cap))
    }

    pub fn instance(
        &self,
        customer_id: &str,
        cutoff: NaiveDate,
        ablation: Ablation,
    ) -> Result<PromptInstance, ContextError> {
        let (pkg, mkg) = self.graphs(customer_id, cutoff, ablation)?;
        let pkg_doc = ablation.uses_pkg().then(|| to_jsonld(&pkg));
        let mkg_doc = ablation.uses_mkg().then(|| to_jsonld(&mkg));
        let messages = build_messages(pkg_doc.as_deref(), mkg_doc.as_deref(), cutoff, ablation)?;
        Ok(PromptInstance {
            customer_id: customer_id.to_string(),
            recommendation_date: cutoff,
            ablation,
            messages,
        })
    }
}
