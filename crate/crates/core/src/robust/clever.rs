//! CLEVER-u: attack-independent estimate of the minimum misclassifying
//! perturbation from extreme-value statistics of sampled gradient norms.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{GradientTarget, TrainedModel};
use crate::rng;
use crate::scalar::{sc, Scalar};

use super::AttackConfig;

/// Maximum-likelihood reverse-Weibull fit of block maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct WeibullFit {
    /// Right endpoint: the local gradient-norm bound estimate.
    pub location: f64,
    pub shape: f64,
    pub scale: f64,
    pub log_likelihood: f64,
}

/// Fit `m_i = location - u_i`, `u_i ~ Weibull(shape, scale)`, by profile
/// likelihood over the location with the shape constrained to `>= 1`
/// (keeping the likelihood bounded near the endpoint). Returns `None` for
/// degenerate samples or failed optimizations; callers fall back to the
/// max of the maxima.
pub fn fit_reverse_weibull_location(maxima: &[f64]) -> Option<WeibullFit> {
    let b = maxima.len();
    if b < 3 {
        return None;
    }
    let top = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bottom = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    let range = top - bottom;
    if !top.is_finite() || range <= 1e-9 * top.abs().max(1.0) {
        return None;
    }

    let profile = |a: f64| -> Option<(f64, f64, f64)> {
        // u normalized by its max so powers stay in (0, 1]
        let u: Vec<f64> = maxima.iter().map(|&m| a - m).collect();
        if u.iter().any(|&v| v <= 0.0) {
            return None;
        }
        let umax = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let un: Vec<f64> = u.iter().map(|&v| v / umax).collect();
        let mean_ln: f64 = un.iter().map(|&v| v.ln()).sum::<f64>() / b as f64;

        let g = |k: f64| -> f64 {
            let mut num = 0.0;
            let mut den = 0.0;
            for &v in &un {
                let p = v.powf(k);
                num += p * v.ln();
                den += p;
            }
            num / den - 1.0 / k - mean_ln
        };
        // g is increasing in k; bracket then bisect
        let mut lo = 1e-2;
        let mut hi = 1.0;
        while g(hi) < 0.0 && hi < 1e4 {
            lo = hi;
            hi *= 2.0;
        }
        let mut k = if g(hi) < 0.0 {
            1e4
        } else {
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        k = k.clamp(1.0, 1e4);
        let scale_n = (un.iter().map(|&v| v.powf(k)).sum::<f64>() / b as f64).powf(1.0 / k);
        let scale = scale_n * umax;
        // at the profile optimum Σ (u / s)^k = B
        let sum_ln_u: f64 = u.iter().map(|&v| v.ln()).sum();
        let ll = b as f64 * (k.ln() - k * scale.ln()) + (k - 1.0) * sum_ln_u - b as f64;
        if ll.is_finite() {
            Some((ll, k, scale))
        } else {
            None
        }
    };

    // golden-section maximization of the profile likelihood over the location
    let golden = 0.618_033_988_749_894_8;
    let mut lo = top + 1e-6 * range;
    let mut hi = top + 10.0 * range;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let mut f1 = profile(x1);
    let mut f2 = profile(x2);
    for _ in 0..70 {
        let v1 = f1.as_ref().map(|t| t.0).unwrap_or(f64::NEG_INFINITY);
        let v2 = f2.as_ref().map(|t| t.0).unwrap_or(f64::NEG_INFINITY);
        for (x, f) in [(x1, &f1), (x2, &f2)] {
            if let Some((ll, k, s)) = f {
                if best.is_none_or(|b| *ll > b.1) {
                    best = Some((x, *ll, *k, *s));
                }
            }
        }
        if v1 > v2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = profile(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = profile(x2);
        }
    }
    best.map(|(a, ll, k, s)| WeibullFit {
        location: a,
        shape: k,
        scale: s,
        log_likelihood: ll,
    })
}

/// Uniform draw from the L2 ball of `radius` around `center`:
/// gaussian direction scaled by `radius * U^(1/d)`.
fn sample_ball_point<S: Scalar>(
    center: &[S],
    radius: f64,
    rng: &mut ChaCha8Rng,
    out: &mut [S],
) {
    let d = center.len();
    let normal = StandardNormal;
    loop {
        let mut norm_sq = 0.0;
        let g: Vec<f64> = (0..d)
            .map(|_| {
                let v: f64 = normal.sample(rng);
                norm_sq += v * v;
                v
            })
            .collect();
        if norm_sq > 0.0 {
            let u: f64 = rng.random_range(0.0..1.0);
            let scale = radius * u.powf(1.0 / d as f64) / norm_sq.sqrt();
            for ((o, &c), gv) in out.iter_mut().zip(center).zip(g) {
                *o = c + sc::<S>(gv * scale);
            }
            return;
        }
    }
}

/// CLEVER-u score for one sample: the minimum over non-predicted classes of
/// `margin / L_hat` clipped to the sampling radius, where `L_hat` is the
/// reverse-Weibull location of per-batch maxima of `||grad (f_c - f_j)||_2`.
///
/// Returns the score and whether any class fell back to the max-of-maxima
/// estimate (degenerate or non-converged fit).
pub fn clever_u<S: Scalar>(
    model: &TrainedModel<S>,
    x: &[S],
    config: &AttackConfig,
    seed: u64,
) -> Result<(f64, bool)> {
    config.validate()?;
    let d = x.len();
    if d != model.spec.input_dim {
        return Err(Error::Shape(format!(
            "sample has {} features, model expects {}",
            d, model.spec.input_dim
        )));
    }
    let x_mat = Matrix::row_vector(x);
    let logits = model.logits(&x_mat)?;
    let row = logits.row(0);
    let c = (0..row.len())
        .max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap())
        .unwrap();

    let mut best = f64::INFINITY;
    let mut fallback_used = false;
    for j in 0..model.spec.n_classes {
        if j == c {
            continue;
        }
        let margin = (row[c] - row[j]).to_f64_c();
        debug_assert!(margin >= 0.0, "predicted class has nonnegative margin");

        let class_label = j.to_string();
        let mut maxima = Vec::with_capacity(config.n_batches);
        let mut all_zero = true;
        for batch in 0..config.n_batches {
            let batch_label = batch.to_string();
            let mut r = rng::stream(seed, &["ball", &class_label, &batch_label]);
            let mut points = Matrix::zeros(config.batch_size, d);
            for p in 0..config.batch_size {
                // split borrow: fill row p in place
                let mut buf = vec![S::zero(); d];
                sample_ball_point(x, config.clever_radius, &mut r, &mut buf);
                points.row_mut(p).copy_from_slice(&buf);
            }
            let grad_c = model.input_gradient(&points, GradientTarget::Logit { class: c })?;
            let grad_j = model.input_gradient(&points, GradientTarget::Logit { class: j })?;
            let mut batch_max = 0.0_f64;
            for p in 0..config.batch_size {
                let mut sq = 0.0;
                for (gc, gj) in grad_c.row(p).iter().zip(grad_j.row(p)) {
                    let diff = (*gc - *gj).to_f64_c();
                    sq += diff * diff;
                }
                batch_max = batch_max.max(sq.sqrt());
            }
            if batch_max > 0.0 {
                all_zero = false;
            }
            maxima.push(batch_max);
        }

        let score_j = if all_zero {
            // no descent direction found anywhere in the ball
            fallback_used = true;
            config.clever_radius
        } else {
            let location = match fit_reverse_weibull_location(&maxima) {
                Some(fit) => fit.location,
                None => {
                    fallback_used = true;
                    maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                }
            };
            (margin / location).min(config.clever_radius)
        };
        best = best.min(score_j);
    }
    Ok((best.max(0.0), fallback_used))
}
