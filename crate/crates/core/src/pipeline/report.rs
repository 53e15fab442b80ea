//! The run report: full audit chain from raw per-seed values to normalized
//! scores, plus the file emitters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::ExplainabilityMetrics;
use crate::fairness::FairnessReport;
use crate::model::TrainingStats;
use crate::robust::RobustnessReport;
use crate::scoring::{DimensionScores, MetricRecord};
use crate::sustain::SustainabilityReport;

use super::markdown::{markdown_table, ScoredCell};
use super::radar::radar_svg;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Markdown,
    RadarSvg,
    AttributionCsv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "radar_svg" | "svg" => Ok(ReportFormat::RadarSvg),
            "attribution_csv" => Ok(ReportFormat::AttributionCsv),
            other => Err(Error::Config(format!("unknown report format \"{other}\""))),
        }
    }
}

/// Aggregated scores for one (dataset, model) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsibilityProfile {
    pub dimension_scores: DimensionScores,
    pub responsibility_score: f64,
    /// Predictive F1, reported separately; never enters the score.
    pub f1: f64,
    pub f1_std: f64,
    pub per_metric: Vec<MetricRecord>,
    pub explainability_categories: BTreeMap<String, f64>,
    pub repeats: usize,
    pub aggregation: String,
}

/// Raw measurements for one seed of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatDetail {
    pub seed: u64,
    pub f1: f64,
    pub training: TrainingStats,
    pub fairness: FairnessReport,
    pub robustness: RobustnessReport,
    pub sustainability: SustainabilityReport,
    pub explainability: ExplainabilityMetrics,
}

/// First-seed attribution dump (feeds the optional CSV emitter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionDump {
    pub feature_names: Vec<String>,
    pub base_value: f64,
    pub target_class: usize,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub dataset: String,
    pub model: String,
    pub seeds: Vec<u64>,
    pub profile: ResponsibilityProfile,
    pub repeats: Vec<RepeatDetail>,
    pub attributions: AttributionDump,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub dataset: String,
    pub model: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub engine_version: String,
    pub config_hash: String,
    /// Wall-clock stamp; the only field allowed to differ between identical
    /// runs.
    pub unix_timestamp: u64,
    pub pool_scope: super::PoolScope,
    pub cells: Vec<CellReport>,
    pub failed_cells: Vec<FailedCell>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Input {
            pointer: e.path().to_string(),
            message: e.to_string(),
        })
    }

    fn scored_cells(&self) -> Vec<ScoredCell> {
        self.cells
            .iter()
            .map(|c| ScoredCell {
                dataset: c.dataset.clone(),
                model: c.model.clone(),
                f1: Some(c.profile.f1),
                dimension_scores: c.profile.dimension_scores.clone(),
                responsibility_score: c.profile.responsibility_score,
                categories: c.profile.explainability_categories.clone(),
                metrics: c
                    .profile
                    .per_metric
                    .iter()
                    .map(|m| (m.name.clone(), m.normalized))
                    .collect(),
            })
            .collect()
    }

    pub fn to_markdown(&self) -> String {
        markdown_table(&self.scored_cells())
    }
}

fn sanitize_filename(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn attribution_csv(dump: &AttributionDump) -> String {
    let mut out = String::new();
    out.push_str(&dump.feature_names.join(","));
    out.push('\n');
    for row in &dump.rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Write the requested artifacts into `output_dir`; returns the paths.
pub fn emit_reports(
    report: &RunReport,
    formats: &[ReportFormat],
    output_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(output_dir)
        .map_err(|e| Error::io(output_dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Json => {
                let path = output_dir.join("report.json");
                write_file(&path, &report.to_json()?)?;
                written.push(path);
            }
            ReportFormat::Markdown => {
                let path = output_dir.join("report.md");
                write_file(&path, &report.to_markdown())?;
                written.push(path);
            }
            ReportFormat::RadarSvg => {
                let mut by_dataset: BTreeMap<&str, Vec<(String, DimensionScores)>> =
                    BTreeMap::new();
                for cell in &report.cells {
                    by_dataset
                        .entry(&cell.dataset)
                        .or_default()
                        .push((cell.model.clone(), cell.profile.dimension_scores.clone()));
                }
                for (dataset, entries) in by_dataset {
                    let path = output_dir
                        .join(format!("radar_{}.svg", sanitize_filename(dataset)));
                    write_file(&path, &radar_svg(dataset, &entries))?;
                    written.push(path);
                }
            }
            ReportFormat::AttributionCsv => {
                for cell in &report.cells {
                    let path = output_dir.join(format!(
                        "attributions_{}_{}.csv",
                        sanitize_filename(&cell.dataset),
                        sanitize_filename(&cell.model)
                    ));
                    write_file(&path, &attribution_csv(&cell.attributions))?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}
