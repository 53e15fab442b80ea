//! Adversarial robustness metrics: FGSM accuracy gap, CLEVER minimum
//! perturbation estimate, and loss sensitivity.

mod clever;
mod fgsm;

pub use clever::{clever_u, fit_reverse_weibull_location, WeibullFit};
pub use fgsm::{fgsm_accuracy_gap, fgsm_perturb, loss_sensitivity};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::TrainedModel;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleverNorm {
    #[default]
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// L-inf budget for FGSM, in standardized-feature units.
    pub epsilon: f64,
    pub clever_radius: f64,
    #[serde(default)]
    pub clever_norm: CleverNorm,
    pub n_batches: usize,
    pub batch_size: usize,
    /// Test rows scored with CLEVER (subsampled with the seed).
    pub clever_samples: usize,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 0.1,
            clever_radius: 2.0,
            clever_norm: CleverNorm::L2,
            n_batches: 50,
            batch_size: 20,
            clever_samples: 10,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.clever_radius <= 0.0 {
            return Err(Error::Config("clever_radius must be positive".into()));
        }
        if self.n_batches * self.batch_size < 50 {
            return Err(Error::Config(
                "n_batches * batch_size must be at least 50".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub clean_accuracy: f64,
    pub adversarial_accuracy: f64,
    /// clean - adversarial; negative values are flagged as anomalies.
    pub accuracy_gap: f64,
    pub clever_u_mean: f64,
    pub loss_sensitivity: f64,
    pub flags: Vec<String>,
}

/// Run the full robustness stage on a test split.
pub fn evaluate_robustness<S: Scalar>(
    model: &TrainedModel<S>,
    x_test: &Matrix<S>,
    y_test: &[usize],
    config: &AttackConfig,
) -> Result<RobustnessReport> {
    config.validate()?;
    if x_test.rows() == 0 {
        return Err(Error::Config("robustness needs a nonempty test split".into()));
    }
    let mut flags = Vec::new();

    let (clean_accuracy, adversarial_accuracy, accuracy_gap) =
        fgsm_accuracy_gap(model, x_test, y_test, config.epsilon)?;
    if accuracy_gap < 0.0 {
        flags.push(format!(
            "fgsm: negative accuracy gap {accuracy_gap:.6} (attack helped); anomaly"
        ));
    }

    let loss_sens = loss_sensitivity(model, x_test, y_test)?;

    // Deterministic subsample of rows for the CLEVER estimate.
    let n_score = config.clever_samples.min(x_test.rows()).max(1);
    let mut pick_rng = rng::stream(config.seed, &["clever", "rows"]);
    let picked = rand::seq::index::sample(&mut pick_rng, x_test.rows(), n_score);
    let mut total = 0.0;
    for i in picked {
        let row_label = i.to_string();
        let (score, fallback) = clever_u(
            model,
            x_test.row(i),
            config,
            rng::derive_seed(config.seed, &["clever", &row_label]),
        )?;
        if fallback {
            flags.push(format!("clever: extreme-value fit fell back to max-of-maxima at row {i}"));
        }
        total += score;
    }

    Ok(RobustnessReport {
        clean_accuracy,
        adversarial_accuracy,
        accuracy_gap,
        clever_u_mean: total / n_score as f64,
        loss_sensitivity: loss_sens,
        flags,
    })
}
