//! Explanation-quality metrics in four categories: stability under input
//! perturbation, faithfulness to the model, sanity under model degradation,
//! and conciseness.

use rand::Rng;

use crate::error::Result;
use crate::linalg::{l2_distance, l2_norm, Matrix};
use crate::model::{randomize_parameters, RandomizeMode, TrainedModel};
use crate::rng;
use crate::scalar::{sc, Scalar};
use crate::stats::{entropy_nat, gini, pearson, spearman};

use super::shap::{class_probability, AttributionMatrix, ShapExplainer};

/// Raw values of the eight explanation-quality metrics for one model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExplainabilityMetrics {
    pub lipschitz: f64,
    pub consistency: f64,
    pub faithfulness_correlation: f64,
    pub faithfulness_estimate: f64,
    pub mprt_score: f64,
    pub random_logit_score: f64,
    pub sparseness: f64,
    pub complexity_entropy: f64,
    pub n_features: usize,
    pub flags: Vec<String>,
}

/// Stability of attributions under input perturbation.
///
/// Lipschitz: mean over samples of the worst ratio
/// `||e(x) - e(x')||_2 / ||x - x'||_2` over `n_perturbations` draws of `x'`
/// uniform in an l-inf ball of `perturb_radius`, re-explaining each draw.
/// Consistency: probability that two samples with identical discretized
/// attribution signatures share a predicted label.
pub fn lipschitz_and_consistency<S: Scalar, F>(
    explainer: &ShapExplainer<S, F>,
    predicted_labels: &[usize],
    x: &Matrix<S>,
    attributions: &AttributionMatrix<S>,
    perturb_radius: f64,
    n_perturbations: usize,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&Matrix<S>) -> Result<Vec<S>>,
{
    let n = x.rows();
    let mut ratio_sum = 0.0;
    for r in 0..n {
        let label = r.to_string();
        let mut sample_rng = rng::stream(seed, &["lipschitz", &label]);
        let mut worst: f64 = 0.0;
        for t in 0..n_perturbations {
            let mut xp = Matrix::row_vector(x.row(r));
            loop {
                for (v, &orig) in xp.row_mut(0).iter_mut().zip(x.row(r)) {
                    let delta: f64 = sample_rng.random_range(-perturb_radius..perturb_radius);
                    *v = orig + sc::<S>(delta);
                }
                if l2_distance(xp.row(0), x.row(r)) > S::zero() {
                    break;
                }
                // zero-distance draw: redraw
            }
            let t_label = t.to_string();
            let sub_seed = rng::derive_seed(seed, &["lipschitz-explain", &label, &t_label]);
            let e_prime = explainer.explain(&xp, sub_seed)?;
            let num: f64 = l2_distance(attributions.values.row(r), e_prime.values.row(0)).to_f64_c();
            let den: f64 = l2_distance(x.row(r), xp.row(0)).to_f64_c();
            worst = worst.max(num / den);
        }
        ratio_sum += worst;
    }
    let lipschitz = if n == 0 { 0.0 } else { ratio_sum / n as f64 };
    let consistency = consistency_score(&attributions.values, predicted_labels);
    Ok((lipschitz, consistency))
}

/// Discretized-signature label agreement.
///
/// Signature per sample: each attribution bucketed into -1 / 0 / +1, where
/// near-zero means `|a| < 1e-3 * max_row |a|`. Pairs of samples with equal
/// signatures vote on whether their predicted labels match; samples with a
/// unique signature are excluded; no matching pairs at all scores 1.0.
pub fn consistency_score<S: Scalar>(values: &Matrix<S>, predicted_labels: &[usize]) -> f64 {
    let n = values.rows();
    debug_assert_eq!(n, predicted_labels.len());
    let mut signatures: Vec<Vec<i8>> = Vec::with_capacity(n);
    for r in 0..n {
        let row = values.row(r);
        let max = row
            .iter()
            .map(|v| v.abs())
            .fold(S::zero(), |m, v| if v > m { v } else { m });
        let cutoff = max * sc::<S>(1e-3);
        signatures.push(
            row.iter()
                .map(|&v| {
                    if v.abs() < cutoff || max == S::zero() {
                        0
                    } else if v > S::zero() {
                        1
                    } else {
                        -1
                    }
                })
                .collect(),
        );
    }
    let mut groups: std::collections::HashMap<&[i8], Vec<usize>> = Default::default();
    for (i, sig) in signatures.iter().enumerate() {
        groups.entry(sig.as_slice()).or_default().push(i);
    }
    let mut pairs = 0usize;
    let mut agreeing = 0usize;
    for members in groups.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                pairs += 1;
                if predicted_labels[i] == predicted_labels[j] {
                    agreeing += 1;
                }
            }
        }
    }
    if pairs == 0 {
        1.0
    } else {
        agreeing as f64 / pairs as f64
    }
}

/// Alignment of attributions with the model's responses to masking.
///
/// Correlation: per sample, Pearson between the summed attributions of a
/// random feature subset and the output drop when that subset is replaced by
/// the baseline, over `n_subsets` draws. Estimate: per sample, Pearson
/// between each feature's attribution and the drop from replacing that
/// feature alone. Zero-variance correlates score 0 and are flagged.
#[allow(clippy::too_many_arguments)]
pub fn faithfulness_metrics<S: Scalar, F>(
    f: &F,
    x: &Matrix<S>,
    attributions: &AttributionMatrix<S>,
    subset_size: usize,
    n_subsets: usize,
    baseline: &[S],
    seed: u64,
) -> Result<(f64, f64, Vec<String>)>
where
    F: Fn(&Matrix<S>) -> Result<Vec<S>>,
{
    let n = x.rows();
    let d = x.cols();
    if subset_size >= d {
        return Err(crate::error::Error::Config(format!(
            "subset_size {subset_size} must be below n_features {d}"
        )));
    }
    let mut flags = Vec::new();
    let fx = f(x)?;

    let mut corr_sum = 0.0;
    let mut est_sum = 0.0;
    for r in 0..n {
        let label = r.to_string();
        let mut sample_rng = rng::stream(seed, &["faithfulness", &label]);

        // random-subset correlation
        let mut masked = Matrix::zeros(n_subsets, d);
        let mut attr_sums = Vec::with_capacity(n_subsets);
        for t in 0..n_subsets {
            let subset = rand::seq::index::sample(&mut sample_rng, d, subset_size);
            masked.row_mut(t).copy_from_slice(x.row(r));
            let mut s_attr = S::zero();
            for j in subset {
                masked.set(t, j, baseline[j]);
                s_attr = s_attr + attributions.values.get(r, j);
            }
            attr_sums.push(s_attr);
        }
        let drops: Vec<S> = f(&masked)?.into_iter().map(|m| fx[r] - m).collect();
        match pearson(&attr_sums, &drops) {
            Some(c) => corr_sum += c.to_f64_c(),
            None => flags.push(format!(
                "faithfulness_correlation: zero variance at sample {r}; correlation set to 0"
            )),
        }

        // single-feature estimate
        let mut singles = Matrix::zeros(d, d);
        for j in 0..d {
            singles.row_mut(j).copy_from_slice(x.row(r));
            singles.set(j, j, baseline[j]);
        }
        let single_drops: Vec<S> = f(&singles)?.into_iter().map(|m| fx[r] - m).collect();
        let attr_row: Vec<S> = attributions.values.row(r).to_vec();
        match pearson(&attr_row, &single_drops) {
            Some(c) => est_sum += c.to_f64_c(),
            None => flags.push(format!(
                "faithfulness_estimate: zero variance at sample {r}; correlation set to 0"
            )),
        }
    }
    let nf = n.max(1) as f64;
    Ok((corr_sum / nf, est_sum / nf, flags))
}

/// Sanity checks against degraded models.
///
/// MPRT: one top-down cascade step per layer; score is one minus the mean
/// absolute Spearman correlation between the original attributions and the
/// degraded model's, flattened over samples x features. Random Logit: one
/// minus the positive part of the mean per-sample Pearson correlation
/// between attributions for the predicted class and for a uniformly drawn
/// different class.
pub fn randomization_metrics<S: Scalar>(
    model: &TrainedModel<S>,
    x: &Matrix<S>,
    attributions: &AttributionMatrix<S>,
    background: &Matrix<S>,
    n_coalitions: usize,
    seed: u64,
) -> Result<(f64, f64, Vec<String>)> {
    let mut flags = Vec::new();

    // Model parameter randomization cascade.
    let n_layers = model.n_layers();
    let mut rho_sum = 0.0;
    for step in 1..=n_layers {
        let degraded = randomize_parameters(model, RandomizeMode::TopDown { steps: step }, seed);
        let f = class_probability(&degraded, attributions.target_class);
        let explainer =
            ShapExplainer::new(f, background.clone(), n_coalitions, attributions.target_class)?;
        let label = step.to_string();
        let degraded_attr = explainer.explain(x, rng::derive_seed(seed, &["mprt", &label]))?;
        match spearman(attributions.values.data(), degraded_attr.values.data()) {
            Some(r) => rho_sum += r.to_f64_c().abs(),
            None => flags.push(format!(
                "mprt: zero-variance attributions at cascade step {step}; correlation set to 0"
            )),
        }
    }
    let mprt_score = (1.0 - rho_sum / n_layers as f64).clamp(0.0, 1.0);

    // Random logit comparison.
    let predicted = model.predict(x)?;
    let k = model.spec.n_classes;
    let mut draw_rng = rng::stream(seed, &["random-logit", "classes"]);
    let others: Vec<usize> = predicted
        .iter()
        .map(|&c| {
            let pick = draw_rng.random_range(0..k - 1);
            if pick >= c {
                pick + 1
            } else {
                pick
            }
        })
        .collect();

    let explain_per_class = |classes: &[usize], tag: &str| -> Result<Matrix<S>> {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for class in 0..k {
            let rows: Vec<usize> = (0..x.rows()).filter(|&r| classes[r] == class).collect();
            if rows.is_empty() {
                continue;
            }
            let subset = x.gather_rows(&rows);
            let f = class_probability(model, class);
            let explainer = ShapExplainer::new(f, background.clone(), n_coalitions, class)?;
            let class_label = class.to_string();
            let attr = explainer.explain(&subset, rng::derive_seed(seed, &[tag, &class_label]))?;
            for (local, &global) in rows.iter().enumerate() {
                out.row_mut(global).copy_from_slice(attr.values.row(local));
            }
        }
        Ok(out)
    };
    let attr_pred = explain_per_class(&predicted, "rlt-pred")?;
    let attr_other = explain_per_class(&others, "rlt-other")?;

    let mut corr_sum = 0.0;
    for r in 0..x.rows() {
        match pearson(attr_pred.row(r), attr_other.row(r)) {
            Some(c) => corr_sum += c.to_f64_c(),
            None => flags.push(format!(
                "random_logit: zero-variance attributions at sample {r}; correlation set to 0"
            )),
        }
    }
    let mean_corr = corr_sum / x.rows().max(1) as f64;
    let random_logit_score = (1.0 - mean_corr.max(0.0)).clamp(0.0, 1.0);

    Ok((mprt_score, random_logit_score, flags))
}

/// Conciseness: mean Gini sparseness and mean Shannon entropy (nats) of the
/// absolute attribution distribution. All-zero rows score sparseness 0 and
/// entropy ln(d), flagged.
pub fn complexity_metrics<S: Scalar>(attributions: &AttributionMatrix<S>) -> (f64, f64, Vec<String>) {
    let values = &attributions.values;
    let n = values.rows();
    let d = values.cols();
    let mut flags = Vec::new();
    let mut gini_sum = 0.0;
    let mut entropy_sum = 0.0;
    for r in 0..n {
        let abs_row: Vec<S> = values.row(r).iter().map(|v| v.abs()).collect();
        let total: S = abs_row.iter().copied().sum();
        if total <= S::zero() {
            flags.push(format!(
                "complexity: all-zero attribution row {r}; sparseness 0, entropy ln(d)"
            ));
            entropy_sum += (d as f64).ln();
            continue;
        }
        gini_sum += gini(&abs_row).to_f64_c();
        entropy_sum += entropy_nat(&abs_row).to_f64_c();
    }
    let nf = n.max(1) as f64;
    (gini_sum / nf, entropy_sum / nf, flags)
}

/// Norm of each attribution row (used by tests and reports).
pub fn attribution_row_norms<S: Scalar>(attr: &AttributionMatrix<S>) -> Vec<f64> {
    (0..attr.values.rows())
        .map(|r| l2_norm(attr.values.row(r)).to_f64_c())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::Mat;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut r = rng::stream(seed, &["m"]);
        let mut m = Mat::zeros(rows, cols);
        for v in m.data_mut() {
            *v = rng::uniform(&mut r, -1.5, 1.5);
        }
        m
    }

    #[test]
    fn constant_model_has_zero_lipschitz() {
        let f = |x: &Mat| Ok(vec![0.7; x.rows()]);
        let bg = random_matrix(4, 3, 1);
        let explainer = ShapExplainer::new(f, bg, 2 * 3 + 8, 0).unwrap();
        let x = random_matrix(3, 3, 2);
        let attr = explainer.explain(&x, 5).unwrap();
        let labels = vec![0, 0, 0];
        let (lip, _) =
            lipschitz_and_consistency(&explainer, &labels, &x, &attr, 0.1, 4, 9).unwrap();
        assert_eq!(lip, 0.0);
    }

    #[test]
    fn consistency_trivial_and_hand_counted_cases() {
        // all signatures identical, all labels identical -> 1.0
        let values = Mat::from_rows(&[
            vec![1.0, -1.0],
            vec![2.0, -2.0],
            vec![0.5, -0.5],
        ])
        .unwrap();
        assert_eq!(consistency_score(&values, &[1, 1, 1]), 1.0);

        // 4 samples, two signature-matched pairs, one pair label-consistent
        let values = Mat::from_rows(&[
            vec![1.0, -1.0], // pair A
            vec![2.0, -2.0], // pair A (labels agree)
            vec![-1.0, 1.0], // pair B
            vec![-2.0, 2.0], // pair B (labels disagree)
        ])
        .unwrap();
        assert_eq!(consistency_score(&values, &[1, 1, 0, 1]), 0.5);

        // no matching pairs at all -> 1.0
        let values = Mat::from_rows(&[vec![1.0, 1.0], vec![-1.0, 1.0]]).unwrap();
        assert_eq!(consistency_score(&values, &[0, 1]), 1.0);
    }

    #[test]
    fn faithfulness_estimate_is_one_for_linear_models() {
        let w = vec![1.2, -0.8, 2.0, 0.3];
        let wf = w.clone();
        let f = move |x: &Mat| {
            Ok(x
                .row_iter()
                .map(|r| r.iter().zip(&wf).map(|(a, b)| a * b).sum::<f64>() + 0.5)
                .collect())
        };
        let bg = random_matrix(12, 4, 3);
        let explainer = ShapExplainer::new(f.clone(), bg, 2 * 4 + 24, 0).unwrap();
        let baseline = explainer.background_mean();
        let x = random_matrix(4, 4, 4);
        let attr = explainer.explain(&x, 6).unwrap();
        let (corr, est, flags) =
            faithfulness_metrics(&f, &x, &attr, 1, 60, &baseline, 8).unwrap();
        assert!(flags.is_empty());
        assert!((est - 1.0).abs() < 1e-6, "estimate {est}");
        // subset sums of a linear model correlate perfectly too
        assert!((corr - 1.0).abs() < 1e-6, "correlation {corr}");
    }

    #[test]
    fn noise_attributions_do_not_correlate() {
        let w = vec![1.0, -1.0, 0.5, 2.0, -0.3, 0.9];
        let wf = w.clone();
        let f = move |x: &Mat| {
            Ok(x
                .row_iter()
                .map(|r| r.iter().zip(&wf).map(|(a, b)| a * b).sum::<f64>())
                .collect())
        };
        let bg = random_matrix(10, 6, 5);
        let explainer = ShapExplainer::new(f.clone(), bg, 2 * 6 + 24, 0).unwrap();
        let baseline = explainer.background_mean();
        let x = random_matrix(6, 6, 6);
        let mut attr = explainer.explain(&x, 7).unwrap();
        // replace attributions with fresh independent noise
        let noise = random_matrix(6, 6, 777);
        attr.values = noise;
        let (corr, _, _) =
            faithfulness_metrics(&f, &x, &attr, 2, 200, &baseline, 9).unwrap();
        assert!(corr.abs() < 0.2, "corr {corr}");
    }

    #[test]
    fn constant_model_faithfulness_is_zero_via_flags() {
        let f = |x: &Mat| Ok(vec![3.0; x.rows()]);
        let bg = random_matrix(4, 3, 8);
        let explainer = ShapExplainer::new(f, bg, 2 * 3 + 8, 0).unwrap();
        let baseline = explainer.background_mean();
        let x = random_matrix(2, 3, 9);
        let attr = explainer.explain(&x, 10).unwrap();
        let (corr, est, flags) =
            faithfulness_metrics(&|x: &Mat| Ok(vec![3.0; x.rows()]), &x, &attr, 1, 20, &baseline, 11)
                .unwrap();
        assert_eq!(corr, 0.0);
        assert_eq!(est, 0.0);
        assert!(!flags.is_empty());
    }

    #[test]
    fn randomization_scores_stay_in_unit_interval() {
        let spec = ModelSpec::mlp_with_hidden(4, vec![6], 2);
        let model = crate::Model::initialized(&spec, 3).unwrap();
        let x = random_matrix(5, 4, 12);
        let bg = random_matrix(6, 4, 13);
        let f = class_probability(&model, 1);
        let explainer = ShapExplainer::new(f, bg.clone(), 2 * 4 + 16, 1).unwrap();
        let attr = explainer.explain(&x, 14).unwrap();
        let (mprt, rlt, _) =
            randomization_metrics(&model, &x, &attr, &bg, 2 * 4 + 16, 15).unwrap();
        assert!((0.0..=1.0).contains(&mprt), "mprt {mprt}");
        assert!((0.0..=1.0).contains(&rlt), "rlt {rlt}");
    }

    #[test]
    fn binary_classifier_random_logit_is_one() {
        // with two classes the other-class probability is 1 - p, so its
        // attributions are exactly negated: correlation -1 -> score 1
        let spec = ModelSpec::mlp_with_hidden(3, vec![5], 2);
        let model = crate::Model::initialized(&spec, 21).unwrap();
        let x = random_matrix(4, 3, 22);
        let bg = random_matrix(5, 3, 23);
        let f = class_probability(&model, 1);
        let explainer = ShapExplainer::new(f, bg.clone(), 2 * 3 + 16, 1).unwrap();
        let attr = explainer.explain(&x, 24).unwrap();
        let (_, rlt, _) = randomization_metrics(&model, &x, &attr, &bg, 2 * 3 + 16, 25).unwrap();
        assert!((rlt - 1.0).abs() < 1e-9, "rlt {rlt}");
    }

    #[test]
    fn identical_attribution_correlation_maps_to_zero_score() {
        // spearman of a vector with itself is 1 -> score contribution 0
        let v = [0.3_f64, -1.0, 2.0, 0.7];
        let rho = spearman(&v, &v).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        assert!((1.0 - rho).abs() < 1e-12); // score term
    }

    #[test]
    fn independent_vectors_score_near_one() {
        // flattened n*d >= 2000 random pairs: |spearman| is tiny
        let a = random_matrix(100, 20, 30);
        let b = random_matrix(100, 20, 31);
        let rho = spearman(a.data(), b.data()).unwrap().abs();
        assert!(1.0 - rho > 0.9, "rho {rho}");
    }

    #[test]
    fn complexity_hand_values() {
        let attr = AttributionMatrix {
            values: Mat::from_rows(&[vec![1.0, 0.0, 0.0, 0.0]]).unwrap(),
            base_value: 0.0,
            outputs: vec![1.0],
            target_class: 0,
            background_ref: 0,
            regularized_rows: vec![],
        };
        let (sparseness, entropy, flags) = complexity_metrics(&attr);
        assert!((sparseness - 0.75).abs() < 1e-12);
        assert!(entropy.abs() < 1e-12);
        assert!(flags.is_empty());
    }

    #[test]
    fn complexity_uniform_and_scaling() {
        let base = vec![0.25_f64, -0.25, 0.25, -0.25];
        let attr = |scale: f64| AttributionMatrix {
            values: Mat::from_rows(&[base.iter().map(|v| v * scale).collect::<Vec<_>>()])
                .unwrap(),
            base_value: 0.0,
            outputs: vec![0.0],
            target_class: 0,
            background_ref: 0,
            regularized_rows: vec![],
        };
        let (g1, h1, _) = complexity_metrics(&attr(1.0));
        let (g3, h3, _) = complexity_metrics(&attr(3.0));
        assert!(g1.abs() < 1e-12);
        assert!((h1 - (4.0_f64).ln()).abs() < 1e-12);
        assert!((g1 - g3).abs() < 1e-12);
        assert!((h1 - h3).abs() < 1e-12);
    }

    #[test]
    fn all_zero_attribution_rows_are_flagged() {
        let attr = AttributionMatrix {
            values: Mat::zeros(2, 5),
            base_value: 0.0,
            outputs: vec![0.0, 0.0],
            target_class: 0,
            background_ref: 0,
            regularized_rows: vec![],
        };
        let (sparseness, entropy, flags) = complexity_metrics(&attr);
        assert_eq!(sparseness, 0.0);
        assert!((entropy - (5.0_f64).ln()).abs() < 1e-12);
        assert_eq!(flags.len(), 2);
    }
}
