//! End-to-end pipeline tests on a synthetic dataset plus replay checks.

use std::path::PathBuf;

use rescore_core::data::{generate_synthetic, to_csv, SyntheticSpec};
use rescore_core::error::Error;
use rescore_core::explain::ShapSettings;
use rescore_core::model::TrainConfig;
use rescore_core::pipeline::{
    emit_reports, run, DatasetRef, ModelTemplate, ReportFormat, RunConfig, RunReport, SplitConfig,
};
use rescore_core::robust::AttackConfig;
use rescore_core::scoring::score_replay_str;

fn write_synthetic_dataset(dir: &std::path::Path, rows: usize, seed: u64) -> DatasetRef {
    let ds = generate_synthetic(&SyntheticSpec {
        n_rows: rows,
        n_numeric: 3,
        n_categorical: 1,
        bias_strength: 0.15,
        seed,
    })
    .unwrap();
    let csv_path = dir.join("data.csv");
    std::fs::write(&csv_path, to_csv(&ds)).unwrap();
    let schema_path = dir.join("schema.json");
    std::fs::write(&schema_path, serde_json::to_string_pretty(&ds.schema).unwrap()).unwrap();
    DatasetRef {
        schema: schema_path,
        csv: csv_path,
    }
}

fn small_config(dir: &std::path::Path, workers: usize) -> RunConfig {
    RunConfig {
        datasets: vec![write_synthetic_dataset(dir, 400, 11)],
        models: vec![ModelTemplate::mlp(), ModelTemplate::tab_resnet()],
        seeds: vec![1, 2],
        split: SplitConfig { test_fraction: 0.2 },
        train: TrainConfig {
            max_epochs: 30,
            patience: 8,
            ..TrainConfig::default()
        },
        attack: AttackConfig {
            n_batches: 10,
            batch_size: 5,
            clever_samples: 3,
            ..AttackConfig::default()
        },
        emission: Default::default(),
        shap: ShapSettings {
            background_size: 15,
            n_coalitions: Some(128),
            n_explain: 5,
            perturb_radius: 0.1,
            n_perturbations: 2,
            n_subsets: 30,
        },
        weights: None,
        fairness_include_supplements: false,
        include_sensitive_feature: true,
        pool_scope: Default::default(),
        output_dir: dir.join("out"),
        workers: Some(workers),
        formats: Some(vec![ReportFormat::Json]),
    }
}

fn report_without_timestamp(report: &RunReport) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    v["unix_timestamp"] = serde_json::json!(0);
    v
}

#[test]
fn smoke_run_produces_scored_cells() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 2);
    let outcome = run(&config).unwrap();
    assert!(!outcome.any_cell_failed, "{:?}", outcome.report.failed_cells);
    assert_eq!(outcome.report.cells.len(), 2);

    for cell in &outcome.report.cells {
        let p = &cell.profile;
        assert_eq!(p.per_metric.len(), 21, "21 metrics per cell");
        for m in &p.per_metric {
            assert!(
                (0.0..=1.0).contains(&m.normalized),
                "{} normalized {} out of range",
                m.name,
                m.normalized
            );
        }
        for v in p.dimension_scores.as_array() {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!((0.0..=1.0).contains(&p.responsibility_score));
        assert_eq!(p.repeats, 2);
        assert_eq!(cell.repeats.len(), 2);
        assert_eq!(p.explainability_categories.len(), 4);
        // audit chain: every record's raw equals the mean of the per-seed raws
        let lipschitz_mean = cell
            .repeats
            .iter()
            .map(|r| r.explainability.lipschitz)
            .sum::<f64>()
            / cell.repeats.len() as f64;
        let record = p.per_metric.iter().find(|m| m.name == "lipschitz").unwrap();
        assert!((record.raw - lipschitz_mean).abs() < 1e-12);
    }

    // report.json landed on disk
    assert!(outcome.written.iter().any(|p| p.ends_with("report.json")));
}

#[test]
fn identical_configs_give_identical_reports_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 2);
    let a = run(&config).unwrap();
    let b = run(&config).unwrap();
    assert_eq!(report_without_timestamp(&a.report), report_without_timestamp(&b.report));
}

#[test]
fn worker_count_does_not_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), 1);
    let one = run(&config).unwrap();
    config.workers = Some(4);
    let four = run(&config).unwrap();
    assert_eq!(
        report_without_timestamp(&one.report),
        report_without_timestamp(&four.report)
    );
}

#[test]
fn zero_models_is_a_config_error_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), 1);
    config.models.clear();
    assert!(matches!(run(&config), Err(Error::Config(_))));
}

#[test]
fn all_emitters_write_valid_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(dir.path(), 2);
    config.seeds = vec![3];
    config.formats = Some(vec![
        ReportFormat::Json,
        ReportFormat::Markdown,
        ReportFormat::RadarSvg,
        ReportFormat::AttributionCsv,
    ]);
    let outcome = run(&config).unwrap();
    let out = dir.path().join("out");
    let json_path = out.join("report.json");
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("**Responsibility Score**"));
    assert!(md.contains("Normalized kgCO2e*"));

    let loaded = RunReport::from_json(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(loaded, outcome.report);

    let svgs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert_eq!(svgs.len(), 1, "one radar per dataset");
    let svg = std::fs::read_to_string(svgs[0].path()).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polygon").count(), 2, "one polygon per model");

    let csvs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| {
            e.file_name()
                .to_string_lossy()
                .starts_with("attributions_")
        })
        .collect();
    assert_eq!(csvs.len(), 2);
    let csv_text = std::fs::read_to_string(csvs[0].path()).unwrap();
    let header = csv_text.lines().next().unwrap();
    assert!(header.split(',').count() >= 4, "feature-name header");

    // re-emitting from the loaded report reproduces the markdown
    let re = emit_reports(&loaded, &[ReportFormat::Markdown], &dir.path().join("out2")).unwrap();
    let md2 = std::fs::read_to_string(&re[0]).unwrap();
    assert_eq!(md, md2);
}

#[test]
fn replay_fixture_scores_all_cells() {
    let fixture: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", "table1_cells.json"]
        .iter()
        .collect();
    let text = std::fs::read_to_string(fixture).unwrap();
    let results = score_replay_str(&text, None).unwrap();
    assert_eq!(results.len(), 9);
    let acs_resnet = results
        .iter()
        .find(|r| r.dataset == "ACSIncome" && r.model == "TabResNet")
        .unwrap();
    assert!((acs_resnet.responsibility_score - 0.8676).abs() <= 0.0005);
}
