//! Metric normalization, dimension aggregation, and the responsibility
//! score.

mod replay;

pub use replay::{score_replay, score_replay_str, ReplayCell, ReplayDoc, ReplayMetric, ReplayResult};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Explainability,
    Fairness,
    Sustainability,
    Robustness,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Explainability,
        Dimension::Fairness,
        Dimension::Sustainability,
        Dimension::Robustness,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Dimension::Explainability => "Explainability",
            Dimension::Fairness => "Fairness",
            Dimension::Sustainability => "Sustainability",
            Dimension::Robustness => "Robustness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// How a raw metric maps onto the unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum NormRule {
    /// Already unit-interval, higher is better.
    IdentityClamp,
    /// Unit-interval, lower is better.
    OneMinusRaw,
    /// `1 - raw / max(pool)` across the comparison pool.
    MaxNormInvert,
    /// `raw / radius` for radius-bounded higher-is-better values.
    RatioOfRadius { radius: f64 },
    /// Correlations: `(r + 1) / 2`.
    RescaleCorrelation,
    /// Entropies: `1 - raw / max_entropy`.
    RescaleEntropy { max_entropy: f64 },
}

/// One raw metric with its normalization outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub name: String,
    pub dimension: Dimension,
    /// Explainability metrics carry their two-metric category.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    /// Raw value (mean over repeats).
    pub raw: f64,
    /// Population standard deviation of the raw value over repeats.
    pub raw_std: f64,
    pub direction: Direction,
    pub norm_rule: NormRule,
    pub normalized: f64,
    /// Whether the record enters its dimension mean (supplementary fairness
    /// metrics are reported but excluded by default).
    pub in_dimension_mean: bool,
}

const DOMAIN_EPS: f64 = 1e-9;

fn check_domain(name: &str, raw: f64, lo: f64, hi: f64) -> Result<f64> {
    if !raw.is_finite() || raw < lo - DOMAIN_EPS || raw > hi + DOMAIN_EPS {
        return Err(Error::Normalization {
            metric: name.to_string(),
            value: raw,
        });
    }
    Ok(raw.clamp(lo, hi))
}

/// Apply a normalization rule. `pool_max` is required (and only used) by
/// `MaxNormInvert`; the optional flag reports degenerate pools.
pub fn normalize(
    name: &str,
    rule: &NormRule,
    raw: f64,
    pool_max: Option<f64>,
) -> Result<(f64, Option<String>)> {
    match rule {
        NormRule::IdentityClamp => Ok((check_domain(name, raw, 0.0, 1.0)?, None)),
        NormRule::OneMinusRaw => Ok((1.0 - check_domain(name, raw, 0.0, 1.0)?, None)),
        NormRule::MaxNormInvert => {
            let max = pool_max.ok_or_else(|| {
                Error::Aggregation(format!("metric \"{name}\" needs a normalization pool"))
            })?;
            if raw < -DOMAIN_EPS || !raw.is_finite() || max < 0.0 {
                return Err(Error::Normalization {
                    metric: name.to_string(),
                    value: raw,
                });
            }
            if max == 0.0 {
                return Ok((
                    1.0,
                    Some(format!("metric \"{name}\": all-zero pool, score defined as 1")),
                ));
            }
            Ok(((1.0 - raw / max).clamp(0.0, 1.0), None))
        }
        NormRule::RatioOfRadius { radius } => {
            if *radius <= 0.0 {
                return Err(Error::Normalization {
                    metric: name.to_string(),
                    value: *radius,
                });
            }
            Ok((check_domain(name, raw, 0.0, *radius)? / radius, None))
        }
        NormRule::RescaleCorrelation => {
            Ok(((check_domain(name, raw, -1.0, 1.0)? + 1.0) / 2.0, None))
        }
        NormRule::RescaleEntropy { max_entropy } => {
            if *max_entropy <= 0.0 {
                return Err(Error::Normalization {
                    metric: name.to_string(),
                    value: *max_entropy,
                });
            }
            Ok((1.0 - check_domain(name, raw, 0.0, *max_entropy)? / max_entropy, None))
        }
    }
}

/// Per-dimension unit-interval scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionScores {
    pub explainability: f64,
    pub fairness: f64,
    pub sustainability: f64,
    pub robustness: f64,
}

impl DimensionScores {
    pub fn get(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Explainability => self.explainability,
            Dimension::Fairness => self.fairness,
            Dimension::Sustainability => self.sustainability,
            Dimension::Robustness => self.robustness,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [
            self.explainability,
            self.fairness,
            self.sustainability,
            self.robustness,
        ]
    }
}

/// Mean of the in-mean records of one dimension. Records carrying a
/// category are first averaged within each category, then across
/// categories (the explainability layout).
pub fn dimension_score(records: &[&MetricRecord]) -> Result<f64> {
    let in_mean: Vec<&&MetricRecord> = records.iter().filter(|r| r.in_dimension_mean).collect();
    if in_mean.is_empty() {
        return Err(Error::Aggregation(
            "dimension has no records in its mean".into(),
        ));
    }
    let with_category = in_mean.iter().filter(|r| r.category.is_some()).count();
    if with_category == 0 {
        return Ok(in_mean.iter().map(|r| r.normalized).sum::<f64>() / in_mean.len() as f64);
    }
    if with_category != in_mean.len() {
        return Err(Error::Aggregation(
            "mixed categorized and uncategorized records in one dimension".into(),
        ));
    }
    let mut by_category: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in in_mean {
        by_category
            .entry(r.category.as_deref().unwrap())
            .or_default()
            .push(r.normalized);
    }
    let n = by_category.len() as f64;
    Ok(by_category
        .values()
        .map(|vals| vals.iter().sum::<f64>() / vals.len() as f64)
        .sum::<f64>()
        / n)
}

/// Category means of categorized records (explainability reporting).
pub fn category_means(records: &[&MetricRecord]) -> BTreeMap<String, f64> {
    let mut by_category: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.in_dimension_mean) {
        if let Some(cat) = &r.category {
            by_category.entry(cat.clone()).or_default().push(r.normalized);
        }
    }
    by_category
        .into_iter()
        .map(|(k, v)| {
            let n = v.len() as f64;
            (k, v.iter().sum::<f64>() / n)
        })
        .collect()
}

/// Weighted mean of the four dimension scores (uniform by default).
pub fn responsibility_score(ds: &DimensionScores, weights: Option<&[f64; 4]>) -> Result<f64> {
    let w = match weights {
        Some(w) => {
            if w.iter().any(|&v| v < 0.0) {
                return Err(Error::Config("weights must be nonnegative".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "weights must sum to 1 (got {total})"
                )));
            }
            *w
        }
        None => [0.25; 4],
    };
    Ok(ds
        .as_array()
        .iter()
        .zip(&w)
        .map(|(d, w)| d * w)
        .sum())
}

/// A raw metric observed in one repeat (pre-normalization).
#[derive(Debug, Clone, PartialEq)]
pub struct RawMetric {
    pub name: String,
    pub dimension: Dimension,
    pub category: Option<String>,
    pub direction: Direction,
    pub norm_rule: NormRule,
    pub in_dimension_mean: bool,
    pub raw: f64,
}

/// Average raw metrics over repeats (before normalization pooling), keeping
/// the per-metric population standard deviation.
pub fn aggregate_repeats(repeats: &[Vec<RawMetric>]) -> Result<Vec<(RawMetric, f64)>> {
    let first = repeats
        .first()
        .ok_or_else(|| Error::Aggregation("no repeats to aggregate".into()))?;
    for (i, rep) in repeats.iter().enumerate() {
        if rep.len() != first.len()
            || rep.iter().zip(first).any(|(a, b)| a.name != b.name)
        {
            return Err(Error::Aggregation(format!(
                "repeat {i} has a different metric set"
            )));
        }
    }
    let n = repeats.len() as f64;
    Ok(first
        .iter()
        .enumerate()
        .map(|(idx, proto)| {
            let values: Vec<f64> = repeats.iter().map(|rep| rep[idx].raw).collect();
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let mut merged = proto.clone();
            merged.raw = mean;
            (merged, var.sqrt())
        })
        .collect())
}
