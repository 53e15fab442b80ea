//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p rescore-core --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rescore_core::data::{generate_synthetic, to_csv, SyntheticSpec};
use rescore_core::explain::{ShapExplainer, ShapSettings};
use rescore_core::linalg::Matrix;
use rescore_core::model::{
    cross_entropy, DenseLayer, GradientTarget, ModelSpec, TrainConfig, TrainedModel,
};
use rescore_core::pipeline::{run, DatasetRef, ModelTemplate, ReportFormat, RunConfig, SplitConfig};
use rescore_core::robust::{clever_u, fgsm_accuracy_gap, fgsm_perturb, AttackConfig};
use rescore_core::rng;
use rescore_core::scoring::{
    normalize, responsibility_score, score_replay_str, Dimension, DimensionScores, NormRule,
};
use rescore_core::sustain::max_norm_invert;
use rescore_core::{fairness, Mat, Model};

fn pass(criterion: usize, what: &str) {
    println!("[PASS] criterion {criterion}: {what}");
}

fn fixture_text() -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", "table1_cells.json"]
        .iter()
        .collect();
    std::fs::read_to_string(path).expect("fixture present")
}

/// Acceptance-side view of the fixture, including the printed scores.
#[derive(serde::Deserialize)]
struct FixtureDoc {
    cells: Vec<FixtureCell>,
}

#[derive(serde::Deserialize)]
struct FixtureCell {
    dataset: String,
    model: String,
    expected: FixtureExpected,
    metrics: Vec<FixtureMetric>,
}

#[derive(serde::Deserialize)]
struct FixtureExpected {
    responsibility_score: f64,
    dimension_scores: BTreeMap<String, f64>,
}

#[derive(serde::Deserialize)]
struct FixtureMetric {
    name: String,
    dimension: String,
    #[serde(default)]
    category: Option<String>,
    normalized: f64,
    #[serde(default)]
    in_dimension_mean: Option<bool>,
}

const TOL: f64 = 0.0005;

#[test]
fn criterion_1_table_replay_reproduces_all_scores() {
    let text = fixture_text();
    let results = score_replay_str(&text, None).expect("replay scores");
    let fixture: FixtureDoc = serde_json::from_str(&text).unwrap();
    assert_eq!(results.len(), 9);

    let mut checked_ds = 0;
    let mut checked_cats = 0;
    for cell in &fixture.cells {
        let result = results
            .iter()
            .find(|r| r.dataset == cell.dataset && r.model == cell.model)
            .expect("cell scored");
        assert!(
            (result.responsibility_score - cell.expected.responsibility_score).abs() <= TOL,
            "{}/{} RS {} vs printed {}",
            cell.dataset,
            cell.model,
            result.responsibility_score,
            cell.expected.responsibility_score
        );
        for (dim, printed) in &cell.expected.dimension_scores {
            let got = match dim.as_str() {
                "explainability" => result.dimension_scores.explainability,
                "fairness" => result.dimension_scores.fairness,
                "sustainability" => result.dimension_scores.sustainability,
                "robustness" => result.dimension_scores.robustness,
                other => panic!("unknown dimension {other}"),
            };
            assert!(
                (got - printed).abs() <= TOL,
                "{}/{} {dim} DS {got} vs printed {printed}",
                cell.dataset,
                cell.model
            );
            checked_ds += 1;
        }
        for metric in cell.metrics.iter().filter(|m| m.dimension == "explainability") {
            let cat = metric.category.as_deref().unwrap();
            let got = result.category_means[cat];
            assert!(
                (got - metric.normalized).abs() <= TOL,
                "{}/{} category {cat}",
                cell.dataset,
                cell.model
            );
            checked_cats += 1;
        }
    }
    assert_eq!(checked_ds, 36);
    assert_eq!(checked_cats, 36);
    pass(1, "replay reproduces 9 RS, 36 DS, and 36 category means within ±0.0005");
}

#[test]
fn criterion_2_fairness_score_rule_holds_on_every_cell() {
    let fixture: FixtureDoc = serde_json::from_str(&fixture_text()).unwrap();
    for cell in &fixture.cells {
        let fair: BTreeMap<&str, f64> = cell
            .metrics
            .iter()
            .filter(|m| m.dimension == "fairness")
            .map(|m| (m.name.as_str(), m.normalized))
            .collect();
        let four = [
            fair["accuracy_diff"],
            fair["precision_diff"],
            fair["tpr_diff"],
            fair["fpr_diff"],
        ];
        let mean = four.iter().sum::<f64>() / 4.0;
        let printed = cell.expected.dimension_scores["fairness"];
        assert!(
            (mean - printed).abs() <= TOL,
            "{}/{}: mean of four diffs {mean} vs printed {printed}",
            cell.dataset,
            cell.model
        );
        // supplements are excluded from the mean in the fixture
        for m in cell.metrics.iter().filter(|m| {
            m.name == "demographic_parity_diff" || m.name == "equalized_odds_diff"
        }) {
            assert_eq!(m.in_dimension_mean, Some(false));
        }
        // printed EOd* equals min(TPR*, FPR*) exactly at 4 decimals
        let eod = format!("{:.4}", fair["equalized_odds_diff"]);
        let min_tf = format!("{:.4}", fair["tpr_diff"].min(fair["fpr_diff"]));
        assert_eq!(eod, min_tf, "{}/{}", cell.dataset, cell.model);
    }
    pass(2, "fairness DS = mean of four inverted diffs; EOd* = min(TPR*, FPR*) at 4 decimals");
}

#[test]
fn criterion_3_synthetic_replication_of_the_efficiency_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&SyntheticSpec {
        n_rows: 5_000,
        n_numeric: 6,
        n_categorical: 2,
        bias_strength: 0.2,
        seed: 7,
    })
    .unwrap();
    let csv = dir.path().join("synthetic.csv");
    std::fs::write(&csv, to_csv(&ds)).unwrap();
    let schema = dir.path().join("schema.json");
    std::fs::write(&schema, serde_json::to_string_pretty(&ds.schema).unwrap()).unwrap();

    let config = RunConfig {
        datasets: vec![DatasetRef { schema, csv }],
        models: vec![ModelTemplate::mlp(), ModelTemplate::tab_resnet()],
        seeds: vec![1, 2, 3, 4, 5],
        split: SplitConfig { test_fraction: 0.2 },
        train: TrainConfig {
            max_epochs: 150,
            ..TrainConfig::default()
        },
        attack: AttackConfig {
            clever_samples: 5,
            ..AttackConfig::default()
        },
        emission: Default::default(),
        shap: ShapSettings {
            background_size: 25,
            n_explain: 10,
            n_perturbations: 3,
            ..ShapSettings::default()
        },
        weights: None,
        fairness_include_supplements: false,
        include_sensitive_feature: true,
        pool_scope: Default::default(),
        output_dir: dir.path().join("out"),
        workers: None,
        formats: Some(vec![ReportFormat::Json]),
    };
    let outcome = run(&config).unwrap();
    assert!(!outcome.any_cell_failed, "{:?}", outcome.report.failed_cells);

    let cell = |name: &str| {
        outcome
            .report
            .cells
            .iter()
            .find(|c| c.model == name)
            .unwrap()
    };
    let mlp = cell("mlp");
    let resnet = cell("tab_resnet");
    let raw = |c: &rescore_core::pipeline::CellReport, name: &str| {
        c.profile
            .per_metric
            .iter()
            .find(|m| m.name == name)
            .unwrap()
            .raw
    };
    // premise: the MLP's cost profile is strictly smaller on this dataset
    let strictly_smaller = raw(mlp, "parameter_count") < raw(resnet, "parameter_count")
        && raw(mlp, "flops") < raw(resnet, "flops")
        && raw(mlp, "macs") < raw(resnet, "macs");
    assert!(strictly_smaller, "fixture must exercise the premise");
    let mlp_ds = mlp.profile.dimension_scores.sustainability;
    let resnet_ds = resnet.profile.dimension_scores.sustainability;
    assert!(
        mlp_ds > resnet_ds,
        "sustainability DS: mlp {mlp_ds} vs tab_resnet {resnet_ds}"
    );
    pass(
        3,
        "5k-row synthetic run: smaller cost profile implies higher sustainability DS (mlp over tab_resnet)",
    );
}

#[test]
fn criterion_4_kernel_shap_matches_linear_closed_form() {
    let mut worst_attr: f64 = 0.0;
    let mut worst_local: f64 = 0.0;
    for trial in 0..50u64 {
        let d = 2 + (trial as usize % 9); // 2..=10
        let mut wr = rng::stream(trial, &["w"]);
        let w: Vec<f64> = (0..d).map(|_| rng::uniform(&mut wr, -2.0, 2.0)).collect();
        let b: f64 = rng::uniform(&mut wr, -1.0, 1.0);
        let wf = w.clone();
        let f = move |x: &Mat| -> rescore_core::Result<Vec<f64>> {
            Ok(x.row_iter()
                .map(|r| r.iter().zip(&wf).map(|(a, c)| a * c).sum::<f64>() + b)
                .collect())
        };
        let n_bg = 1 + (trial as usize % 7);
        let mut bg = Mat::zeros(n_bg, d);
        for v in bg.data_mut() {
            *v = rng::uniform(&mut wr, -1.5, 1.5);
        }
        let mean: Vec<f64> = (0..d)
            .map(|j| (0..n_bg).map(|r| bg.get(r, j)).sum::<f64>() / n_bg as f64)
            .collect();
        let explainer = ShapExplainer::new(f, bg, 2 * d + 512, 0).unwrap();
        let mut x = Mat::zeros(2, d);
        for v in x.data_mut() {
            *v = rng::uniform(&mut wr, -2.0, 2.0);
        }
        let attr = explainer.explain(&x, trial).unwrap();
        for r in 0..2 {
            for j in 0..d {
                let expected = w[j] * (x.get(r, j) - mean[j]);
                worst_attr = worst_attr.max((attr.values.get(r, j) - expected).abs());
            }
        }
        worst_local = worst_local.max(attr.local_accuracy_error());
    }
    assert!(worst_attr < 1e-6, "worst attribution error {worst_attr}");
    assert!(worst_local < 1e-6, "worst local accuracy error {worst_local}");
    pass(
        4,
        "kernel SHAP exact on 50 random linear models (<=1e-6); local accuracy <=1e-6",
    );
}

#[test]
fn criterion_5_gradients_match_central_finite_differences() {
    let h = 1e-4;
    let mut checked_pairs = 0;
    let mut checked_elements = 0;
    for trial in 0..100u64 {
        let spec = if trial % 2 == 0 {
            ModelSpec::mlp_with_hidden(5, vec![8], 2)
        } else {
            ModelSpec::tab_resnet(5, 2)
        };
        let model = Model::initialized(&spec, trial).unwrap();
        // the FD oracle is only valid away from ReLU kinks; re-draw inputs
        // whose pre-activations sit within reach of the probe step
        let mut attempt = 0u64;
        let x = loop {
            let mut xr = rng::stream(trial * 1000 + attempt, &["x"]);
            let mut x = Mat::zeros(1, 5);
            for v in x.data_mut() {
                *v = rng::uniform(&mut xr, -1.5, 1.5);
            }
            if model.relu_preactivation_margin(&x) > 1e-2 {
                break x;
            }
            attempt += 1;
            assert!(attempt < 100, "no kink-free input found");
        };
        let labels = vec![(trial % 2) as usize];
        let grad = model
            .input_gradient(&x, GradientTarget::Loss { labels: &labels })
            .unwrap();
        for dvar in 0..5 {
            let mut xp = x.clone();
            xp.set(0, dvar, x.get(0, dvar) + h);
            let mut xm = x.clone();
            xm.set(0, dvar, x.get(0, dvar) - h);
            let lp = cross_entropy(&model.predict_proba(&xp).unwrap(), &labels);
            let lm = cross_entropy(&model.predict_proba(&xm).unwrap(), &labels);
            let fd = (lp - lm) / (2.0 * h);
            let a = grad.get(0, dvar);
            if a.abs() > 1e-6 {
                let rel = (a - fd).abs() / a.abs();
                assert!(
                    rel < 1e-4,
                    "trial {trial} dim {dvar}: analytic {a} fd {fd} rel {rel}"
                );
                checked_elements += 1;
            }
        }
        checked_pairs += 1;
    }
    assert_eq!(checked_pairs, 100);
    assert!(checked_elements > 300, "enough nontrivial elements checked");
    pass(
        5,
        "analytic input gradients match central differences (rel < 1e-4) on 100 random pairs",
    );
}

#[test]
fn criterion_6_fairness_matches_exhaustive_oracle_to_n8() {
    // independent oracle: direct confusion-cell counting
    fn oracle(y_true: &[bool], y_pred: &[bool], group: &[bool]) -> [f64; 6] {
        let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let per_group = |g: bool| -> [f64; 5] {
            let mut tp = 0;
            let mut fp = 0;
            let mut tn = 0;
            let mut fne = 0;
            for i in 0..y_true.len() {
                if group[i] != g {
                    continue;
                }
                match (y_true[i], y_pred[i]) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (false, false) => tn += 1,
                    (true, false) => fne += 1,
                }
            }
            let n = tp + fp + tn + fne;
            [
                rate(tp + tn, n),
                rate(tp, tp + fp),
                rate(tp, tp + fne),
                rate(fp, fp + tn),
                rate(tp + fp, n),
            ]
        };
        let p = per_group(true);
        let u = per_group(false);
        let tpr = (p[2] - u[2]).abs();
        let fpr = (p[3] - u[3]).abs();
        [
            (p[0] - u[0]).abs(),
            (p[1] - u[1]).abs(),
            tpr,
            fpr,
            (p[4] - u[4]).abs(),
            tpr.max(fpr),
        ]
    }

    let mut assignments: u64 = 0;
    for n in 1..=8usize {
        let combos = 1usize << n;
        let mut y_true = vec![false; n];
        let mut y_pred = vec![false; n];
        let mut group = vec![false; n];
        for gbits in 1..combos - 1 {
            for i in 0..n {
                group[i] = (gbits >> i) & 1 == 1;
            }
            for tbits in 0..combos {
                for i in 0..n {
                    y_true[i] = (tbits >> i) & 1 == 1;
                }
                for pbits in 0..combos {
                    for i in 0..n {
                        y_pred[i] = (pbits >> i) & 1 == 1;
                    }
                    let gp = fairness::GroupedPredictions::new(
                        y_true.clone(),
                        y_pred.clone(),
                        group.clone(),
                    )
                    .unwrap();
                    let r = fairness::fairness_report(&gp).unwrap();
                    let expected = oracle(&y_true, &y_pred, &group);
                    let got = [
                        r.accuracy_diff,
                        r.precision_diff,
                        r.tpr_diff,
                        r.fpr_diff,
                        r.demographic_parity_diff,
                        r.equalized_odds_diff,
                    ];
                    for (a, b) in got.iter().zip(&expected) {
                        assert!((a - b).abs() < 1e-12, "n={n} t={tbits:b} p={pbits:b} g={gbits:b}");
                    }
                    assignments += 1;
                }
            }
        }
    }
    // sum over n of (2^n - 2) * 4^n = 18,999,200
    assert_eq!(assignments, 18_999_200, "exhausted every assignment");
    pass(6, "all six fairness metrics match the exhaustive oracle for n <= 8");
}

#[test]
fn criterion_7_clever_matches_the_linear_oracle() {
    for trial in 0..20u64 {
        let d = 2 + (trial as usize % 5);
        let mut wr = rng::stream(trial, &["clever-w"]);
        let spec = ModelSpec::linear(d, 2);
        let mut layer = DenseLayer::zeros(d, 2);
        for i in 0..d {
            layer.weight.set(i, 0, rng::uniform(&mut wr, -1.5, 1.5));
            layer.weight.set(i, 1, rng::uniform(&mut wr, -1.5, 1.5));
        }
        layer.bias = vec![
            rng::uniform(&mut wr, -0.5, 0.5),
            rng::uniform(&mut wr, -0.5, 0.5),
        ];
        let model = TrainedModel::from_layers(spec, vec![layer]).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng::uniform(&mut wr, -1.0, 1.0)).collect();

        let cfg = AttackConfig::default(); // 50 batches x 20 samples, radius 2
        let (score, _) = clever_u(&model, &x, &cfg, trial).unwrap();

        let logits = model.logits(&Mat::row_vector(&x)).unwrap();
        let margin = (logits.get(0, 0) - logits.get(0, 1)).abs();
        let mut norm_sq = 0.0;
        for i in 0..d {
            let diff = model.layers[0].weight.get(i, 0) - model.layers[0].weight.get(i, 1);
            norm_sq += diff * diff;
        }
        let oracle = (margin / norm_sq.sqrt()).min(cfg.clever_radius);
        assert!(
            (score - oracle).abs() <= 0.05 * oracle.max(1e-9),
            "trial {trial}: {score} vs {oracle}"
        );
    }
    pass(7, "clever_u within 5% of min(margin/||w||, radius) on 20 random linear models");
}

#[test]
fn criterion_8_fgsm_contracts() {
    // budget contract on random models
    for trial in 0..10u64 {
        let spec = ModelSpec::mlp_with_hidden(4, vec![6], 2);
        let model = Model::initialized(&spec, trial).unwrap();
        let mut xr = rng::stream(trial, &["fgsm-x"]);
        let mut x = Mat::zeros(8, 4);
        for v in x.data_mut() {
            *v = rng::uniform(&mut xr, -1.0, 1.0);
        }
        let y: Vec<usize> = (0..8).map(|i| i % 2).collect();
        let eps = 0.15;
        let adv = fgsm_perturb(&model, &x, &y, eps).unwrap();
        for (a, o) in adv.data().iter().zip(x.data()) {
            assert!((a - o).abs() <= eps + 1e-15, "budget exceeded");
        }
    }

    // vanishing epsilon keeps the predictions
    let spec = ModelSpec::mlp_with_hidden(3, vec![6], 2);
    let model = Model::initialized(&spec, 3).unwrap();
    let mut xr = rng::stream(4, &["fgsm-x2"]);
    let mut x = Mat::zeros(30, 3);
    for v in x.data_mut() {
        *v = rng::uniform(&mut xr, -1.0, 1.0);
    }
    let y: Vec<usize> = (0..30).map(|i| i % 2).collect();
    let (_, _, gap) = fgsm_accuracy_gap(&model, &x, &y, 1e-12).unwrap();
    assert_eq!(gap, 0.0);

    // constructed 1-D boundary crossing: every point flips
    let lin_spec = ModelSpec::linear(1, 2);
    let mut layer = DenseLayer::zeros(1, 2);
    layer.weight.set(0, 0, 1.0);
    layer.weight.set(0, 1, -1.0);
    let lin = TrainedModel::from_layers(lin_spec, vec![layer]).unwrap();
    let pts = Mat::from_rows(&[vec![0.5], vec![-0.5]]).unwrap();
    let labels = vec![0, 1];
    let (clean, adv, gap) = fgsm_accuracy_gap(&lin, &pts, &labels, 1.0).unwrap();
    assert_eq!((clean, adv, gap), (1.0, 0.0, 1.0));

    pass(8, "FGSM: l-inf budget held, gap 0 at eps=1e-12, gap 1 on the 1-D crossing case");
}

#[test]
fn criterion_9_normalization_aggregation_and_determinism() {
    // max-norm: scale invariance and argmax-to-zero
    let mut r = rng::stream(77, &["norm"]);
    for _ in 0..200 {
        let n = 2 + (rng::uniform::<f64>(&mut r, 0.0, 6.0) as usize);
        let v: Vec<f64> = (0..n).map(|_| rng::uniform(&mut r, 0.0, 10.0)).collect();
        let scale: f64 = rng::uniform(&mut r, 0.1, 9.0);
        let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let (a, _) = max_norm_invert(&v).unwrap();
        let (b, _) = max_norm_invert(&scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
        let argmax = v
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(a[argmax], 0.0);
    }

    // one_minus_raw endpoints
    let (zero, _) = normalize("m", &NormRule::OneMinusRaw, 1.0, None).unwrap();
    let (one, _) = normalize("m", &NormRule::OneMinusRaw, 0.0, None).unwrap();
    assert_eq!((zero, one), (0.0, 1.0));

    // RS monotonicity under a single-metric improvement, 1000 trials
    for trial in 0..1000u64 {
        let mut tr = rng::stream(trial, &["rs-mono"]);
        let mut ds: Vec<f64> = (0..4).map(|_| rng::uniform(&mut tr, 0.0, 1.0)).collect();
        let base = DimensionScores {
            explainability: ds[0],
            fairness: ds[1],
            sustainability: ds[2],
            robustness: ds[3],
        };
        let rs0 = responsibility_score(&base, None).unwrap();
        let which = (rng::uniform::<f64>(&mut tr, 0.0, 4.0) as usize).min(3);
        let bump: f64 = rng::uniform(&mut tr, 0.0, 1.0 - ds[which]);
        ds[which] += bump;
        let bumped = DimensionScores {
            explainability: ds[0],
            fairness: ds[1],
            sustainability: ds[2],
            robustness: ds[3],
        };
        let rs1 = responsibility_score(&bumped, None).unwrap();
        assert!(rs1 + 1e-12 >= rs0, "trial {trial}: {rs1} < {rs0}");
    }

    // end-to-end determinism: two runs, workers 1 vs 4
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&SyntheticSpec {
        n_rows: 300,
        n_numeric: 3,
        n_categorical: 1,
        bias_strength: 0.1,
        seed: 5,
    })
    .unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, to_csv(&ds)).unwrap();
    let schema = dir.path().join("s.json");
    std::fs::write(&schema, serde_json::to_string(&ds.schema).unwrap()).unwrap();
    let mut config = RunConfig {
        datasets: vec![DatasetRef { schema, csv }],
        models: vec![ModelTemplate::mlp(), ModelTemplate::tab_resnet()],
        seeds: vec![1, 2],
        split: SplitConfig { test_fraction: 0.2 },
        train: TrainConfig {
            max_epochs: 20,
            patience: 6,
            ..TrainConfig::default()
        },
        attack: AttackConfig {
            n_batches: 10,
            batch_size: 5,
            clever_samples: 2,
            ..AttackConfig::default()
        },
        emission: Default::default(),
        shap: ShapSettings {
            background_size: 10,
            n_coalitions: Some(96),
            n_explain: 4,
            perturb_radius: 0.1,
            n_perturbations: 2,
            n_subsets: 20,
        },
        weights: None,
        fairness_include_supplements: false,
        include_sensitive_feature: true,
        pool_scope: Default::default(),
        output_dir: dir.path().join("out"),
        workers: Some(1),
        formats: Some(vec![ReportFormat::Json]),
    };
    let strip = |report: &rescore_core::pipeline::RunReport| {
        let mut v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        v["unix_timestamp"] = serde_json::json!(0);
        serde_json::to_string(&v).unwrap()
    };
    let first = run(&config).unwrap();
    let second = run(&config).unwrap();
    assert_eq!(strip(&first.report), strip(&second.report), "repeat determinism");
    config.workers = Some(4);
    let four = run(&config).unwrap();
    assert_eq!(strip(&first.report), strip(&four.report), "worker-count determinism");

    // used below only to silence the unused-import lint for Dimension
    let _ = Dimension::Explainability;

    pass(
        9,
        "max-norm/1-raw properties, RS monotonicity (1000 trials), byte-identical reports across runs and worker counts",
    );
}
