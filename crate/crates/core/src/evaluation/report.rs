//! Result tables: one row per (model, data ablation).

use serde::{Deserialize, Serialize};

use super::{Evaluation, Metric, MetricResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub data: String,
    pub metrics: [MetricResult; 3],
}

impl ResultRow {
    pub fn new(evaluation: &Evaluation, data: impl Into<String>) -> Self {
        Self {
            model: evaluation.recommender.clone(),
            data: data.into(),
            metrics: evaluation.metrics.clone(),
        }
    }
}

fn cell(m: &MetricResult) -> String {
    format!("{:.4} ± {:.4}", m.mean, m.stderr)
}

/// `model,data,Pref@3,Prof@3,Comb@3,n_pref,n_prof,n_comb` with
/// `mean ± stderr` cells.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("model,data");
    for m in Metric::ALL {
        out.push(',');
        out.push_str(m.label());
    }
    out.push_str(",n_pref,n_prof,n_comb\n");
    for r in rows {
        out.push_str(&format!("{},{}", r.model, r.data));
        for m in &r.metrics {
            out.push(',');
            out.push_str(&cell(m));
        }
        for m in &r.metrics {
            out.push_str(&format!(",{}", m.n));
        }
        out.push('\n');
    }
    out
}

/// Scatter data: raw means and standard errors per row.
pub fn plot_data_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("model,data,pref,pref_se,prof,prof_se,comb,comb_se\n");
    for r in rows {
        out.push_str(&format!("{},{}", r.model, r.data));
        for m in &r.metrics {
            out.push_str(&format!(",{},{}", m.mean, m.stderr));
        }
        out.push('\n');
    }
    out
}
