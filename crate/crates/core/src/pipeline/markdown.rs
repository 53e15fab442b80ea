//! Markdown grid mirroring the scored-cell table layout: one column per
//! (dataset, model) cell, dimension scores in bold, leaf metrics beneath,
//! asterisk on inverted (lower-is-better) metrics.

use std::collections::BTreeMap;

use crate::scoring::{DimensionScores, ReplayResult};

/// Everything the grid needs for one column.
#[derive(Debug, Clone)]
pub struct ScoredCell {
    pub dataset: String,
    pub model: String,
    pub f1: Option<f64>,
    pub dimension_scores: DimensionScores,
    pub responsibility_score: f64,
    /// Explainability category means by canonical key.
    pub categories: BTreeMap<String, f64>,
    /// Normalized leaf metrics by canonical name.
    pub metrics: BTreeMap<String, f64>,
}

impl ScoredCell {
    pub fn from_replay(r: &ReplayResult, metrics: BTreeMap<String, f64>) -> Self {
        ScoredCell {
            dataset: r.dataset.clone(),
            model: r.model.clone(),
            f1: r.f1,
            dimension_scores: r.dimension_scores.clone(),
            responsibility_score: r.responsibility_score,
            categories: r.category_means.clone(),
            metrics,
        }
    }
}

enum Row {
    F1,
    Rs,
    Dimension(&'static str, fn(&DimensionScores) -> f64),
    Category(&'static str, &'static str),
    Metric(&'static str, &'static str),
}

const ROWS: &[Row] = &[
    Row::F1,
    Row::Rs,
    Row::Dimension("**Explainability Score**", |d| d.explainability),
    Row::Category("Complexity", "complexity"),
    Row::Category("Faithfulness", "faithfulness"),
    Row::Category("Robustness", "robustness"),
    Row::Category("Randomisation", "randomisation"),
    Row::Dimension("**Fairness Score**", |d| d.fairness),
    Row::Metric("Accuracy Diff*", "accuracy_diff"),
    Row::Metric("Precision Diff*", "precision_diff"),
    Row::Metric("TPR Diff*", "tpr_diff"),
    Row::Metric("FPR Diff*", "fpr_diff"),
    Row::Metric("DemP Diff*", "demographic_parity_diff"),
    Row::Metric("EOd Diff*", "equalized_odds_diff"),
    Row::Dimension("**Sustainability Score**", |d| d.sustainability),
    Row::Metric("Parameters Count*", "parameter_count"),
    Row::Metric("FLOPs*", "flops"),
    Row::Metric("MACs*", "macs"),
    Row::Metric("Normalized kgCO2e*", "kg_co2e"),
    Row::Dimension("**Robustness Score**", |d| d.robustness),
    Row::Metric("Accuracy Gap*", "accuracy_gap"),
    Row::Metric("CLEVER-u", "clever_u"),
    Row::Metric("Loss Sensitivity*", "loss_sensitivity"),
];

fn fmt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

/// Render the grid; cells become columns in the given order.
pub fn markdown_table(cells: &[ScoredCell]) -> String {
    let mut out = String::new();
    out.push_str("| Metric |");
    for c in cells {
        out.push_str(&format!(" {} / {} |", c.dataset, c.model));
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in cells {
        out.push_str("---|");
    }
    out.push('\n');

    for row in ROWS {
        let (label, values): (String, Vec<Option<f64>>) = match row {
            Row::F1 => (
                "**F1-Score**".into(),
                cells.iter().map(|c| c.f1).collect(),
            ),
            Row::Rs => (
                "**Responsibility Score**".into(),
                cells.iter().map(|c| Some(c.responsibility_score)).collect(),
            ),
            Row::Dimension(label, get) => (
                (*label).into(),
                cells.iter().map(|c| Some(get(&c.dimension_scores))).collect(),
            ),
            Row::Category(label, key) => (
                (*label).into(),
                cells.iter().map(|c| c.categories.get(*key).copied()).collect(),
            ),
            Row::Metric(label, key) => (
                (*label).into(),
                cells.iter().map(|c| c.metrics.get(*key).copied()).collect(),
            ),
        };
        out.push_str(&format!("| {label} |"));
        for v in values {
            out.push_str(&format!(" {} |", fmt(v)));
        }
        out.push('\n');
    }
    out
}
