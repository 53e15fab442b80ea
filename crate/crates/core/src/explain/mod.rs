//! Attribution generation (kernel SHAP) and explanation-quality metrics.

mod quality;
mod shap;

pub use quality::{
    attribution_row_norms, complexity_metrics, consistency_score, faithfulness_metrics,
    lipschitz_and_consistency, randomization_metrics, ExplainabilityMetrics,
};
pub use shap::{class_probability, matrix_fingerprint, AttributionMatrix, ShapExplainer};

use crate::error::Result;
use crate::linalg::Matrix;
use crate::model::TrainedModel;
use crate::scalar::Scalar;

/// Hyperparameters for the explanation stage.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ShapSettings {
    /// Training rows sampled (with seed) as the masking background.
    pub background_size: usize,
    /// Coalition budget; defaults to `2 d + 512` when absent.
    #[serde(default)]
    pub n_coalitions: Option<usize>,
    /// Test rows explained per cell (subsampled with seed).
    pub n_explain: usize,
    /// L-inf radius for the local stability probe.
    pub perturb_radius: f64,
    pub n_perturbations: usize,
    /// Random-subset draws per sample for faithfulness correlation.
    pub n_subsets: usize,
}

impl Default for ShapSettings {
    fn default() -> Self {
        ShapSettings {
            background_size: 50,
            n_coalitions: None,
            n_explain: 20,
            perturb_radius: 0.1,
            n_perturbations: 5,
            n_subsets: 100,
        }
    }
}

impl ShapSettings {
    pub fn coalitions_for(&self, n_features: usize) -> usize {
        self.n_coalitions.unwrap_or(2 * n_features + 512)
    }
}

/// Run the full explanation stage for one model: kernel SHAP on `x_explain`
/// plus all eight quality metrics.
pub fn evaluate_explainability<S: Scalar>(
    model: &TrainedModel<S>,
    x_explain: &Matrix<S>,
    background: &Matrix<S>,
    settings: &ShapSettings,
    target_class: usize,
    seed: u64,
) -> Result<(ExplainabilityMetrics, AttributionMatrix<S>)> {
    let d = x_explain.cols();
    let n_coalitions = settings.coalitions_for(d);
    let f = class_probability(model, target_class);
    let explainer = ShapExplainer::new(f, background.clone(), n_coalitions, target_class)?;
    let attributions = explainer.explain(x_explain, crate::rng::derive_seed(seed, &["explain"]))?;

    let mut flags = Vec::new();
    if !attributions.regularized_rows.is_empty() {
        flags.push(format!(
            "kernel_shap: singular weighted system on rows {:?}; least-norm ridge solve used",
            attributions.regularized_rows
        ));
    }

    let predicted = model.predict(x_explain)?;
    let (lipschitz, consistency) = lipschitz_and_consistency(
        &explainer,
        &predicted,
        x_explain,
        &attributions,
        settings.perturb_radius,
        settings.n_perturbations,
        crate::rng::derive_seed(seed, &["stability"]),
    )?;

    let baseline = explainer.background_mean();
    let (faithfulness_correlation, faithfulness_estimate) = if d < 2 {
        flags.push("faithfulness: skipped for single-feature data (no strict subsets)".into());
        (0.0, 0.0)
    } else {
        let subset_size = (d / 4).clamp(1, d - 1);
        let f2 = class_probability(model, target_class);
        let (corr, est, mut faith_flags) = faithfulness_metrics(
            &f2,
            x_explain,
            &attributions,
            subset_size,
            settings.n_subsets,
            &baseline,
            crate::rng::derive_seed(seed, &["faithfulness"]),
        )?;
        flags.append(&mut faith_flags);
        (corr, est)
    };

    let (mprt_score, random_logit_score, mut rand_flags) = randomization_metrics(
        model,
        x_explain,
        &attributions,
        background,
        n_coalitions,
        crate::rng::derive_seed(seed, &["randomization"]),
    )?;
    flags.append(&mut rand_flags);

    let (sparseness, complexity_entropy, mut cx_flags) = complexity_metrics(&attributions);
    flags.append(&mut cx_flags);

    Ok((
        ExplainabilityMetrics {
            lipschitz,
            consistency,
            faithfulness_correlation,
            faithfulness_estimate,
            mprt_score,
            random_logit_score,
            sparseness,
            complexity_entropy,
            n_features: d,
            flags,
        },
        attributions,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::rng;
    use crate::Mat;

    #[test]
    fn full_stage_produces_sane_metrics() {
        let spec = ModelSpec::mlp_with_hidden(4, vec![6], 2);
        let model = crate::Model::initialized(&spec, 1).unwrap();
        let mut r = rng::stream(2, &["x"]);
        let mut x = Mat::zeros(6, 4);
        for v in x.data_mut() {
            *v = rng::uniform(&mut r, -1.0, 1.0);
        }
        let mut bg = Mat::zeros(8, 4);
        for v in bg.data_mut() {
            *v = rng::uniform(&mut r, -1.0, 1.0);
        }
        let settings = ShapSettings {
            background_size: 8,
            n_coalitions: Some(2 * 4 + 24),
            n_explain: 6,
            perturb_radius: 0.1,
            n_perturbations: 2,
            n_subsets: 30,
        };
        let (m, attr) = evaluate_explainability(&model, &x, &bg, &settings, 1, 9).unwrap();
        assert!(attr.local_accuracy_error() < 1e-6);
        assert!(m.lipschitz >= 0.0);
        assert!((0.0..=1.0).contains(&m.consistency));
        assert!((-1.0..=1.0).contains(&m.faithfulness_correlation));
        assert!((-1.0..=1.0).contains(&m.faithfulness_estimate));
        assert!((0.0..=1.0).contains(&m.mprt_score));
        assert!((0.0..=1.0).contains(&m.random_logit_score));
        assert!((0.0..=1.0).contains(&m.sparseness));
        assert!(m.complexity_entropy >= 0.0);
        assert_eq!(m.n_features, 4);
    }

    #[test]
    fn stage_is_deterministic_per_seed() {
        let spec = ModelSpec::linear(3, 2);
        let model = crate::Model::initialized(&spec, 4).unwrap();
        let mut r = rng::stream(5, &["x"]);
        let mut x = Mat::zeros(4, 3);
        for v in x.data_mut() {
            *v = rng::uniform(&mut r, -1.0, 1.0);
        }
        let bg = x.clone();
        let settings = ShapSettings {
            background_size: 4,
            n_coalitions: Some(2 * 3 + 16),
            n_explain: 4,
            perturb_radius: 0.05,
            n_perturbations: 2,
            n_subsets: 20,
        };
        let (a, _) = evaluate_explainability(&model, &x, &bg, &settings, 1, 42).unwrap();
        let (b, _) = evaluate_explainability(&model, &x, &bg, &settings, 1, 42).unwrap();
        assert_eq!(a, b);
    }
}
