//! Score replay: recompute dimension and responsibility scores from a JSON
//! document of pre-normalized metric values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{
    category_means, dimension_score, responsibility_score, Dimension, DimensionScores, Direction,
    MetricRecord, NormRule,
};

#[derive(Debug, Clone, Deserialize)]
pub struct ReplayDoc {
    pub cells: Vec<ReplayCell>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReplayCell {
    pub dataset: String,
    pub model: String,
    #[serde(default)]
    pub f1: Option<f64>,
    pub metrics: Vec<ReplayMetric>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReplayMetric {
    pub name: String,
    pub dimension: Dimension,
    #[serde(default)]
    pub category: Option<String>,
    pub normalized: f64,
    #[serde(default = "default_true")]
    pub in_dimension_mean: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayResult {
    pub dataset: String,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    pub dimension_scores: DimensionScores,
    pub responsibility_score: f64,
    /// Explainability category means, when categories are present.
    pub category_means: BTreeMap<String, f64>,
}

/// Parse replay JSON; schema violations carry the offending JSON pointer.
pub fn parse_replay(text: &str) -> Result<ReplayDoc> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Input {
        pointer: e.path().to_string(),
        message: e.to_string(),
    })
}

/// Score every cell of a parsed replay document.
pub fn score_replay(doc: &ReplayDoc, weights: Option<&[f64; 4]>) -> Result<Vec<ReplayResult>> {
    doc.cells
        .iter()
        .map(|cell| {
            let records: Vec<MetricRecord> = cell
                .metrics
                .iter()
                .map(|m| {
                    if !(0.0..=1.0).contains(&m.normalized) {
                        return Err(Error::Normalization {
                            metric: m.name.clone(),
                            value: m.normalized,
                        });
                    }
                    Ok(MetricRecord {
                        name: m.name.clone(),
                        dimension: m.dimension,
                        category: m.category.clone(),
                        raw: m.normalized,
                        raw_std: 0.0,
                        direction: Direction::HigherBetter,
                        norm_rule: NormRule::IdentityClamp,
                        normalized: m.normalized,
                        in_dimension_mean: m.in_dimension_mean,
                    })
                })
                .collect::<Result<_>>()?;
            let per_dim = |dim: Dimension| -> Result<f64> {
                let refs: Vec<&MetricRecord> =
                    records.iter().filter(|r| r.dimension == dim).collect();
                if refs.is_empty() {
                    return Err(Error::Aggregation(format!(
                        "cell {}/{} has no {} metrics",
                        cell.dataset,
                        cell.model,
                        dim.label()
                    )));
                }
                dimension_score(&refs)
            };
            let ds = DimensionScores {
                explainability: per_dim(Dimension::Explainability)?,
                fairness: per_dim(Dimension::Fairness)?,
                sustainability: per_dim(Dimension::Sustainability)?,
                robustness: per_dim(Dimension::Robustness)?,
            };
            let rs = responsibility_score(&ds, weights)?;
            let expl_refs: Vec<&MetricRecord> = records
                .iter()
                .filter(|r| r.dimension == Dimension::Explainability)
                .collect();
            Ok(ReplayResult {
                dataset: cell.dataset.clone(),
                model: cell.model.clone(),
                f1: cell.f1,
                dimension_scores: ds,
                responsibility_score: rs,
                category_means: category_means(&expl_refs),
            })
        })
        .collect()
}

/// Convenience: parse then score.
pub fn score_replay_str(text: &str, weights: Option<&[f64; 4]>) -> Result<Vec<ReplayResult>> {
    score_replay(&parse_replay(text)?, weights)
}

/// Four-decimal table of replay results (one line per cell).
pub fn format_replay_table(results: &[ReplayResult]) -> String {
    let mut out = String::new();
    out.push_str(
        "dataset,model,f1,explainability,fairness,sustainability,robustness,responsibility\n",
    );
    for r in results {
        let f1 = r
            .f1
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            r.dataset,
            r.model,
            f1,
            r.dimension_scores.explainability,
            r.dimension_scores.fairness,
            r.dimension_scores.sustainability,
            r.dimension_scores.robustness,
            r.responsibility_score,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_metric_single_dimension_weights() {
        let doc = ReplayDoc {
            cells: vec![ReplayCell {
                dataset: "d".into(),
                model: "m".into(),
                f1: None,
                metrics: vec![
                    ReplayMetric {
                        name: "only".into(),
                        dimension: Dimension::Explainability,
                        category: None,
                        normalized: 0.42,
                        in_dimension_mean: true,
                    },
                    ReplayMetric {
                        name: "f".into(),
                        dimension: Dimension::Fairness,
                        category: None,
                        normalized: 0.0,
                        in_dimension_mean: true,
                    },
                    ReplayMetric {
                        name: "s".into(),
                        dimension: Dimension::Sustainability,
                        category: None,
                        normalized: 0.0,
                        in_dimension_mean: true,
                    },
                    ReplayMetric {
                        name: "r".into(),
                        dimension: Dimension::Robustness,
                        category: None,
                        normalized: 0.0,
                        in_dimension_mean: true,
                    },
                ],
            }],
        };
        let results = score_replay(&doc, Some(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(results[0].responsibility_score, 0.42);
    }

    #[test]
    fn empty_cell_list_is_fine() {
        let results = score_replay_str(r#"{"cells": []}"#, None).unwrap();
        assert!(results.is_empty());
        assert_eq!(
            format_replay_table(&results).lines().count(),
            1 // header only
        );
    }

    #[test]
    fn schema_violation_reports_a_pointer() {
        let err = parse_replay(r#"{"cells": [{"dataset": "d"}]}"#).unwrap_err();
        match err {
            Error::Input { pointer, .. } => assert!(pointer.contains("cells"), "{pointer}"),
            other => panic!("expected input error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_normalized_values_are_rejected() {
        let text = r#"{"cells": [{"dataset": "d", "model": "m", "metrics": [
            {"name": "x", "dimension": "fairness", "normalized": 1.75}
        ]}]}"#;
        let doc = parse_replay(text).unwrap();
        assert!(matches!(
            score_replay(&doc, None),
            Err(Error::Normalization { .. })
        ));
    }
}
