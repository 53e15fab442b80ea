//! End-to-end orchestration: load, split, train, evaluate all metric
//! stages, aggregate repeats, pool, normalize, score, and emit artifacts.

pub mod markdown;
pub mod radar;
mod report;

pub use markdown::{markdown_table, ScoredCell};
pub use radar::radar_svg;
pub use report::{
    emit_reports, AttributionDump, CellReport, FailedCell, RepeatDetail, ReportFormat,
    ResponsibilityProfile, RunReport, REPORT_FORMAT_VERSION,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    encode_and_standardize, load_csv, split, DatasetSchema, EncodeOptions, EncodedSplit,
    TabularDataset,
};
use crate::error::{Error, Result};
use crate::explain::{evaluate_explainability, ShapSettings};
use crate::fairness::{fairness_report, GroupedPredictions};
use crate::model::{
    cost_profile, train, Architecture, ModelSpec, TrainConfig,
};
use crate::robust::{evaluate_robustness, AttackConfig};
use crate::rng;
use crate::scoring::{
    aggregate_repeats, category_means, dimension_score, normalize, responsibility_score,
    Dimension, DimensionScores, Direction, MetricRecord, NormRule, RawMetric,
};
use crate::stats::{binary_f1, population_std};
use crate::sustain::{estimate_co2e, EmissionContext, SustainabilityReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolScope {
    /// Max-norm pools span every (dataset, model) cell in the run.
    #[default]
    Global,
    /// Pools are restricted to cells of the same dataset.
    PerDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    /// Path to the dataset schema JSON.
    pub schema: PathBuf,
    /// Path to the CSV file.
    pub csv: PathBuf,
}

/// Model description without the input dimension (which depends on the
/// encoded dataset width).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTemplate {
    pub name: String,
    pub architecture: Architecture,
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    #[serde(default)]
    pub n_blocks: usize,
    #[serde(default)]
    pub block_dim: usize,
    #[serde(default)]
    pub dropout_rates: Vec<f64>,
}

impl ModelTemplate {
    pub fn mlp() -> Self {
        ModelTemplate {
            name: "mlp".into(),
            architecture: Architecture::Mlp,
            hidden_dims: vec![50],
            n_blocks: 0,
            block_dim: 0,
            dropout_rates: vec![],
        }
    }

    pub fn tab_resnet() -> Self {
        ModelTemplate {
            name: "tab_resnet".into(),
            architecture: Architecture::TabResnet,
            hidden_dims: vec![],
            n_blocks: 2,
            block_dim: 16,
            dropout_rates: vec![0.2, 0.05],
        }
    }

    pub fn instantiate(&self, input_dim: usize, n_classes: usize) -> ModelSpec {
        ModelSpec {
            architecture: self.architecture,
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            n_blocks: self.n_blocks,
            block_dim: self.block_dim,
            n_classes,
            activation: Default::default(),
            dropout_rates: self.dropout_rates.clone(),
        }
    }
}

fn default_models() -> Vec<ModelTemplate> {
    vec![ModelTemplate::mlp(), ModelTemplate::tab_resnet()]
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub datasets: Vec<DatasetRef>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelTemplate>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub emission: EmissionContext,
    #[serde(default)]
    pub shap: ShapSettings,
    /// Dimension weights for the responsibility score (uniform when absent).
    #[serde(default)]
    pub weights: Option<[f64; 4]>,
    /// Include demographic parity / equalized odds in the fairness mean.
    #[serde(default)]
    pub fairness_include_supplements: bool,
    /// Keep the sensitive attribute as a model feature.
    #[serde(default = "default_true")]
    pub include_sensitive_feature: bool,
    #[serde(default)]
    pub pool_scope: PoolScope,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Artifacts written by `run`; defaults to json + markdown + radar.
    #[serde(default)]
    pub formats: Option<Vec<ReportFormat>>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(0.0..1.0).contains(&self.split.test_fraction) || self.split.test_fraction == 0.0 {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        let mut names = std::collections::HashSet::new();
        for m in &self.models {
            if !names.insert(m.name.as_str()) {
                return Err(Error::Config(format!("duplicate model name \"{}\"", m.name)));
            }
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|&v| v < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(
                    "weights must be nonnegative and sum to 1".into(),
                ));
            }
        }
        self.attack.validate()?;
        self.emission.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Input {
            pointer: e.path().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    /// Stable content hash of the canonical JSON serialization, excluding
    /// fields that cannot affect the computed scores (worker count, output
    /// location, emitted formats).
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = None;
        canonical.output_dir = PathBuf::new();
        canonical.formats = None;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{h:016x}")
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    pub written: Vec<PathBuf>,
    pub any_cell_failed: bool,
}

struct CellRaw {
    dataset: String,
    dataset_index: usize,
    model: String,
    seeds: Vec<u64>,
    repeats: Vec<RepeatDetail>,
    merged: Vec<(RawMetric, f64)>,
    attributions: AttributionDump,
    flags: Vec<String>,
}

/// Run the full pipeline. Deterministic given the config (seeds included);
/// worker count never affects the report.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;

    let mut datasets = Vec::new();
    for dref in &config.datasets {
        let schema_text = std::fs::read_to_string(&dref.schema)
            .map_err(|e| Error::io(dref.schema.display().to_string(), e))?;
        let schema: DatasetSchema = serde_json::from_str(&schema_text)?;
        let dataset = load_csv(&dref.csv, &schema)?;
        datasets.push(dataset);
    }
    {
        let mut names = std::collections::HashSet::new();
        for d in &datasets {
            if !names.insert(d.schema.name.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate dataset name \"{}\"",
                    d.schema.name
                )));
            }
        }
    }

    let jobs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..config.models.len()).map(move |m| (d, m)))
        .collect();

    let workers = std::env::var("RESCORE_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(config.workers)
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let results: Vec<std::result::Result<CellRaw, FailedCell>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(di, mi)| {
                let dataset = &datasets[di];
                let template = &config.models[mi];
                run_cell(dataset, di, template, config).map_err(|e| FailedCell {
                    dataset: dataset.schema.name.clone(),
                    model: template.name.clone(),
                    error: e.to_string(),
                })
            })
            .collect()
    });

    let mut cells_raw = Vec::new();
    let mut failed_cells = Vec::new();
    for r in results {
        match r {
            Ok(c) => cells_raw.push(c),
            Err(f) => failed_cells.push(f),
        }
    }

    // Max-norm pools over the successful cells, keyed by metric name and
    // (for per-dataset scope) the dataset.
    let pool_key = |cell: &CellRaw| -> usize {
        match config.pool_scope {
            PoolScope::Global => 0,
            PoolScope::PerDataset => cell.dataset_index,
        }
    };
    let mut pools: BTreeMap<(usize, String), f64> = BTreeMap::new();
    for cell in &cells_raw {
        for (metric, _) in &cell.merged {
            if matches!(metric.norm_rule, NormRule::MaxNormInvert) {
                let key = (pool_key(cell), metric.name.clone());
                let entry = pools.entry(key).or_insert(0.0);
                *entry = entry.max(metric.raw);
            }
        }
    }

    let mut cells = Vec::new();
    for cell in cells_raw {
        let mut records = Vec::new();
        let mut flags = cell.flags.clone();
        for (metric, std) in &cell.merged {
            let pool_max = matches!(metric.norm_rule, NormRule::MaxNormInvert)
                .then(|| pools[&(pool_key(&cell), metric.name.clone())]);
            let (normalized, flag) = normalize(&metric.name, &metric.norm_rule, metric.raw, pool_max)?;
            if let Some(f) = flag {
                flags.push(f);
            }
            records.push(MetricRecord {
                name: metric.name.clone(),
                dimension: metric.dimension,
                category: metric.category.clone(),
                raw: metric.raw,
                raw_std: *std,
                direction: metric.direction,
                norm_rule: metric.norm_rule.clone(),
                normalized,
                in_dimension_mean: metric.in_dimension_mean,
            });
        }
        let per_dim = |dim: Dimension| -> Result<f64> {
            let refs: Vec<&MetricRecord> =
                records.iter().filter(|r| r.dimension == dim).collect();
            dimension_score(&refs)
        };
        let ds = DimensionScores {
            explainability: per_dim(Dimension::Explainability)?,
            fairness: per_dim(Dimension::Fairness)?,
            sustainability: per_dim(Dimension::Sustainability)?,
            robustness: per_dim(Dimension::Robustness)?,
        };
        let rs = responsibility_score(&ds, config.weights.as_ref())?;
        let expl_refs: Vec<&MetricRecord> = records
            .iter()
            .filter(|r| r.dimension == Dimension::Explainability)
            .collect();
        let f1_values: Vec<f64> = cell.repeats.iter().map(|r| r.f1).collect();
        let f1_mean = f1_values.iter().sum::<f64>() / f1_values.len() as f64;

        cells.push(CellReport {
            dataset: cell.dataset,
            model: cell.model,
            seeds: cell.seeds,
            profile: ResponsibilityProfile {
                dimension_scores: ds,
                responsibility_score: rs,
                f1: f1_mean,
                f1_std: population_std(&f1_values),
                explainability_categories: category_means(&expl_refs),
                per_metric: records,
                repeats: cell.repeats.len(),
                aggregation: "mean_over_repeats".into(),
            },
            repeats: cell.repeats,
            attributions: cell.attributions,
            flags,
        });
    }

    let any_cell_failed = !failed_cells.is_empty();
    let report = RunReport {
        format_version: REPORT_FORMAT_VERSION,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.content_hash(),
        unix_timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        pool_scope: config.pool_scope,
        cells,
        failed_cells,
    };

    let formats = config.formats.clone().unwrap_or_else(|| {
        vec![
            ReportFormat::Json,
            ReportFormat::Markdown,
            ReportFormat::RadarSvg,
        ]
    });
    let output_dir = std::env::var("RESCORE_OUTPUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|_| config.output_dir.clone());
    let written = emit_reports(&report, &formats, &output_dir)?;

    Ok(RunOutcome {
        report,
        written,
        any_cell_failed,
    })
}

fn run_cell(
    dataset: &TabularDataset,
    dataset_index: usize,
    template: &ModelTemplate,
    config: &RunConfig,
) -> Result<CellRaw> {
    let dataset_name = dataset.schema.name.clone();
    let encode_opts = EncodeOptions {
        include_sensitive_feature: config.include_sensitive_feature,
    };
    let mut repeats_raw: Vec<Vec<RawMetric>> = Vec::new();
    let mut details: Vec<RepeatDetail> = Vec::new();
    let mut flags: Vec<String> = Vec::new();
    let mut attributions: Option<AttributionDump> = None;

    for &seed in &config.seeds {
        let (train_idx, test_idx) = split(dataset, config.split.test_fraction, seed)?;
        let enc: EncodedSplit<f64> =
            encode_and_standardize(dataset, &train_idx, &test_idx, &encode_opts)?;
        for w in &enc.warnings {
            flags.push(format!("seed {seed}: {w}"));
        }
        let spec = template.instantiate(enc.n_features(), 2);
        let model = train(&spec, &enc.x_train, &enc.y_train, &config.train, seed)?;

        let preds = model.predict(&enc.x_test)?;
        let f1 = binary_f1(&enc.y_test, &preds);

        let gp = GroupedPredictions::new(
            enc.y_test.iter().map(|&y| y == 1).collect(),
            preds.iter().map(|&p| p == 1).collect(),
            enc.group_test.clone(),
        )?;
        let fairness = fairness_report(&gp)?;

        let cost = cost_profile(&spec)?;
        let kg_co2e = estimate_co2e(&model.stats, &config.emission)?;

        let attack = AttackConfig {
            seed: rng::derive_seed(
                config.attack.seed,
                &[&dataset_name, &template.name, &seed.to_string()],
            ),
            ..config.attack.clone()
        };
        let robustness = evaluate_robustness(&model, &enc.x_test, &enc.y_test, &attack)?;
        for w in &robustness.flags {
            flags.push(format!("seed {seed}: {w}"));
        }

        // explanation stage on seeded subsamples
        let mut bg_rng = rng::stream(seed, &["background", &dataset_name, &template.name]);
        let bg_count = config.shap.background_size.min(enc.x_train.rows()).max(1);
        let bg_idx: Vec<usize> =
            rand::seq::index::sample(&mut bg_rng, enc.x_train.rows(), bg_count).into_vec();
        let background = enc.x_train.gather_rows(&bg_idx);

        let mut ex_rng = rng::stream(seed, &["explain-rows", &dataset_name, &template.name]);
        let ex_count = config.shap.n_explain.min(enc.x_test.rows()).max(1);
        let ex_idx: Vec<usize> =
            rand::seq::index::sample(&mut ex_rng, enc.x_test.rows(), ex_count).into_vec();
        let x_explain = enc.x_test.gather_rows(&ex_idx);

        let (explainability, attr) = evaluate_explainability(
            &model,
            &x_explain,
            &background,
            &config.shap,
            1,
            rng::derive_seed(seed, &["explain", &dataset_name, &template.name]),
        )?;
        for w in &explainability.flags {
            flags.push(format!("seed {seed}: {w}"));
        }

        if attributions.is_none() {
            attributions = Some(AttributionDump {
                feature_names: enc.feature_names.clone(),
                base_value: attr.base_value,
                target_class: attr.target_class,
                rows: (0..attr.values.rows())
                    .map(|r| attr.values.row(r).to_vec())
                    .collect(),
            });
        }

        let mut gap_for_norm = robustness.accuracy_gap;
        if gap_for_norm < 0.0 {
            flags.push(format!(
                "seed {seed}: negative accuracy gap clamped to 0 for normalization"
            ));
            gap_for_norm = 0.0;
        }

        repeats_raw.push(build_raw_metrics(
            &explainability,
            &fairness,
            kg_co2e,
            &cost,
            gap_for_norm,
            robustness.clever_u_mean,
            robustness.loss_sensitivity,
            attack.clever_radius,
            config.fairness_include_supplements,
        ));
        details.push(RepeatDetail {
            seed,
            f1,
            training: model.stats.clone(),
            fairness,
            robustness,
            sustainability: SustainabilityReport { kg_co2e, cost },
            explainability,
        });
    }

    let merged = aggregate_repeats(&repeats_raw)?;
    Ok(CellRaw {
        dataset: dataset_name,
        dataset_index,
        model: template.name.clone(),
        seeds: config.seeds.clone(),
        repeats: details,
        merged,
        attributions: attributions.expect("at least one seed ran"),
        flags,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_raw_metrics(
    explainability: &crate::explain::ExplainabilityMetrics,
    fairness: &crate::fairness::FairnessReport,
    kg_co2e: f64,
    cost: &crate::model::CostProfile,
    accuracy_gap: f64,
    clever_u: f64,
    loss_sensitivity: f64,
    clever_radius: f64,
    fairness_include_supplements: bool,
) -> Vec<RawMetric> {
    use Dimension::*;
    use Direction::*;

    let expl = |name: &str, category: &str, raw: f64, direction, rule| RawMetric {
        name: name.into(),
        dimension: Explainability,
        category: Some(category.into()),
        direction,
        norm_rule: rule,
        in_dimension_mean: true,
        raw,
    };
    let plain = |name: &str, dim, raw: f64, direction, rule, in_mean: bool| RawMetric {
        name: name.into(),
        dimension: dim,
        category: None,
        direction,
        norm_rule: rule,
        in_dimension_mean: in_mean,
        raw,
    };

    let max_entropy = (explainability.n_features.max(2) as f64).ln();
    vec![
        expl("lipschitz", "robustness", explainability.lipschitz, LowerBetter, NormRule::MaxNormInvert),
        expl("consistency", "robustness", explainability.consistency, HigherBetter, NormRule::IdentityClamp),
        expl(
            "faithfulness_correlation",
            "faithfulness",
            explainability.faithfulness_correlation,
            HigherBetter,
            NormRule::RescaleCorrelation,
        ),
        expl(
            "faithfulness_estimate",
            "faithfulness",
            explainability.faithfulness_estimate,
            HigherBetter,
            NormRule::RescaleCorrelation,
        ),
        expl("mprt", "randomisation", explainability.mprt_score, HigherBetter, NormRule::IdentityClamp),
        expl(
            "random_logit",
            "randomisation",
            explainability.random_logit_score,
            HigherBetter,
            NormRule::IdentityClamp,
        ),
        expl("sparseness", "complexity", explainability.sparseness, HigherBetter, NormRule::IdentityClamp),
        expl(
            "complexity",
            "complexity",
            explainability.complexity_entropy.min(max_entropy),
            LowerBetter,
            NormRule::RescaleEntropy { max_entropy },
        ),
        plain("accuracy_diff", Fairness, fairness.accuracy_diff, LowerBetter, NormRule::OneMinusRaw, true),
        plain("precision_diff", Fairness, fairness.precision_diff, LowerBetter, NormRule::OneMinusRaw, true),
        plain("tpr_diff", Fairness, fairness.tpr_diff, LowerBetter, NormRule::OneMinusRaw, true),
        plain("fpr_diff", Fairness, fairness.fpr_diff, LowerBetter, NormRule::OneMinusRaw, true),
        plain(
            "demographic_parity_diff",
            Fairness,
            fairness.demographic_parity_diff,
            LowerBetter,
            NormRule::OneMinusRaw,
            fairness_include_supplements,
        ),
        plain(
            "equalized_odds_diff",
            Fairness,
            fairness.equalized_odds_diff,
            LowerBetter,
            NormRule::OneMinusRaw,
            fairness_include_supplements,
        ),
        plain(
            "parameter_count",
            Sustainability,
            cost.parameter_count as f64,
            LowerBetter,
            NormRule::MaxNormInvert,
            true,
        ),
        plain("flops", Sustainability, cost.flops_per_forward as f64, LowerBetter, NormRule::MaxNormInvert, true),
        plain("macs", Sustainability, cost.macs_per_forward as f64, LowerBetter, NormRule::MaxNormInvert, true),
        plain("kg_co2e", Sustainability, kg_co2e, LowerBetter, NormRule::MaxNormInvert, true),
        plain("accuracy_gap", Robustness, accuracy_gap, LowerBetter, NormRule::OneMinusRaw, true),
        plain(
            "clever_u",
            Robustness,
            clever_u,
            HigherBetter,
            NormRule::RatioOfRadius { radius: clever_radius },
            true,
        ),
        plain(
            "loss_sensitivity",
            Robustness,
            loss_sensitivity,
            LowerBetter,
            NormRule::MaxNormInvert,
            true,
        ),
    ]
}
