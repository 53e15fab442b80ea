//! Single-step sign-gradient attack and the loss-gradient norm metric.

use crate::error::{Error, Result};
use crate::linalg::{l2_norm, Matrix};
use crate::model::{GradientTarget, TrainedModel};
use crate::scalar::{sc, Scalar};
use crate::stats::accuracy;

/// `X_adv = X + epsilon * sign(d loss / d x)`, with `sign(0) = 0`.
pub fn fgsm_perturb<S: Scalar>(
    model: &TrainedModel<S>,
    x: &Matrix<S>,
    labels: &[usize],
    epsilon: f64,
) -> Result<Matrix<S>> {
    if epsilon <= 0.0 {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let grad = model.input_gradient(x, GradientTarget::Loss { labels })?;
    let eps = sc::<S>(epsilon);
    let mut adv = x.clone();
    for (v, &g) in adv.data_mut().iter_mut().zip(grad.data()) {
        let step = if g > S::zero() {
            eps
        } else if g < S::zero() {
            -eps
        } else {
            S::zero()
        };
        *v = *v + step;
    }
    Ok(adv)
}

/// Clean accuracy, adversarial accuracy, and their gap. FGSM has no
/// randomness, so the result is fully deterministic.
pub fn fgsm_accuracy_gap<S: Scalar>(
    model: &TrainedModel<S>,
    x_test: &Matrix<S>,
    y_test: &[usize],
    epsilon: f64,
) -> Result<(f64, f64, f64)> {
    if x_test.rows() == 0 {
        return Err(Error::Config("empty test split".into()));
    }
    let clean_preds = model.predict(x_test)?;
    let clean = accuracy(y_test, &clean_preds);
    let adv_x = fgsm_perturb(model, x_test, y_test, epsilon)?;
    let adv_preds = model.predict(&adv_x)?;
    let adv = accuracy(y_test, &adv_preds);
    Ok((clean, adv, clean - adv))
}

/// Mean L2 norm of the per-sample loss gradient.
pub fn loss_sensitivity<S: Scalar>(
    model: &TrainedModel<S>,
    x: &Matrix<S>,
    labels: &[usize],
) -> Result<f64> {
    if x.rows() == 0 {
        return Err(Error::Config("empty sample set".into()));
    }
    let grad = model.input_gradient(x, GradientTarget::Loss { labels })?;
    let total: f64 = (0..grad.rows())
        .map(|r| l2_norm(grad.row(r)).to_f64_c())
        .sum();
    Ok(total / grad.rows() as f64)
}
