//! Seeded training loop: Adam, mini-batches, early stopping on validation F1.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::scalar::{sc, Scalar};
use crate::stats::macro_f1;

use super::net::{DropoutCtx, LayerGrad};
use super::{cost_profile, cross_entropy, softmax_rows, ModelSpec, TrainedModel, TrainingStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Early-stopping patience on validation F1, in epochs.
    pub patience: usize,
    pub batch_size: usize,
    /// Fraction of the training rows held out for validation F1.
    pub val_fraction: f64,
    /// Stop as soon as validation F1 reaches this threshold.
    pub target_f1: Option<f64>,
    /// Reference throughput for the deterministic wall-clock estimate
    /// (training FLOPs / throughput). Keeps reports reproducible across
    /// machines, unlike measured time.
    pub throughput_flops_per_sec: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 400,
            patience: 20,
            batch_size: 128,
            val_fraction: 0.2,
            target_f1: None,
            throughput_flops_per_sec: 1e9,
        }
    }
}

struct AdamState<S> {
    m: Vec<LayerGrad<S>>,
    v: Vec<LayerGrad<S>>,
    step: usize,
}

impl<S: Scalar> AdamState<S> {
    fn new(model: &TrainedModel<S>) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| LayerGrad {
                    d_weight: Matrix::zeros(l.in_dim(), l.out_dim()),
                    d_bias: vec![S::zero(); l.out_dim()],
                })
                .collect::<Vec<_>>()
        };
        AdamState {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    fn update(&mut self, model: &mut TrainedModel<S>, grads: &[LayerGrad<S>], lr: f64) {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let b1 = sc::<S>(BETA1);
        let b2 = sc::<S>(BETA2);
        let eps = sc::<S>(EPS);
        let bc1 = sc::<S>(1.0 - BETA1.powi(self.step as i32));
        let bc2 = sc::<S>(1.0 - BETA2.powi(self.step as i32));
        let lr = sc::<S>(lr);
        for (idx, grad) in grads.iter().enumerate() {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            let layer = &mut model.layers[idx];
            for ((w, &g), (ms, vs)) in layer
                .weight
                .data_mut()
                .iter_mut()
                .zip(grad.d_weight.data())
                .zip(m.d_weight.data_mut().iter_mut().zip(v.d_weight.data_mut()))
            {
                *ms = b1 * *ms + (S::one() - b1) * g;
                *vs = b2 * *vs + (S::one() - b2) * g * g;
                let mh = *ms / bc1;
                let vh = *vs / bc2;
                *w = *w - lr * mh / (vh.sqrt() + eps);
            }
            for ((b, &g), (ms, vs)) in layer
                .bias
                .iter_mut()
                .zip(&grad.d_bias)
                .zip(m.d_bias.iter_mut().zip(v.d_bias.iter_mut()))
            {
                *ms = b1 * *ms + (S::one() - b1) * g;
                *vs = b2 * *vs + (S::one() - b2) * g * g;
                let mh = *ms / bc1;
                let vh = *vs / bc2;
                *b = *b - lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Stratified train/validation index split (largest-remainder per class).
fn validation_split(
    labels: &[usize],
    fraction: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let n = labels.len();
    let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let total_val = ((n as f64) * fraction).round() as usize;
    let total_val = total_val.min(n.saturating_sub(1));
    let mut quotas: Vec<(usize, f64)> = by_class
        .values()
        .map(|idx| {
            let exact = idx.len() as f64 * fraction;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.partial_cmp(&quotas[a].1).unwrap());
    let mut oi = 0;
    while assigned < total_val && oi < order.len() {
        quotas[order[oi]].0 += 1;
        assigned += 1;
        oi += 1;
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (class_idx, idx) in by_class.values().enumerate() {
        let mut shuffled = idx.clone();
        shuffled.shuffle(rng);
        let take = quotas[class_idx].0.min(shuffled.len().saturating_sub(1));
        val.extend_from_slice(&shuffled[..take]);
        train.extend_from_slice(&shuffled[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Train a classifier to the configured F1 protocol; deterministic per seed.
pub fn train<S: Scalar>(
    spec: &ModelSpec,
    x: &Matrix<S>,
    labels: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel<S>> {
    spec.validate()?;
    if x.cols() != spec.input_dim {
        return Err(Error::Config(format!(
            "training data has {} features, spec expects {}",
            x.cols(),
            spec.input_dim
        )));
    }
    if x.rows() != labels.len() {
        return Err(Error::Config(format!(
            "{} rows but {} labels",
            x.rows(),
            labels.len()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::Config("need at least 2 training rows".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= spec.n_classes) {
        return Err(Error::Config(format!(
            "label {} out of range for {} classes",
            bad, spec.n_classes
        )));
    }

    let mut model = TrainedModel::initialized(spec, seed)?;
    let mut split_rng = rng::stream(seed, &["val-split"]);
    let (train_idx, val_idx) = validation_split(labels, config.val_fraction, &mut split_rng);
    let x_val = x.gather_rows(&val_idx);
    let y_val: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut shuffle_rng = rng::stream(seed, &["shuffle"]);
    let mut dropout_rng = rng::stream(seed, &["dropout"]);
    let dropout_rates = spec.dropout_rates.clone();
    let use_dropout = dropout_rates.iter().any(|&p| p > 0.0);

    let mut adam = AdamState::new(&model);
    let mut best_layers = model.layers.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut epochs_since_best = 0usize;
    let mut epochs_run = 0usize;

    let mut order: Vec<usize> = train_idx.clone();
    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size.max(1)) {
            let xb = x.gather_rows(batch);
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (logits, trace) = if use_dropout {
                let mut ctx = DropoutCtx {
                    rng: &mut dropout_rng,
                    rates: dropout_rates.clone(),
                };
                model.forward_trace(&xb, Some(&mut ctx))
            } else {
                model.forward_trace(&xb, None)
            };
            let probs = softmax_rows(&logits);
            let loss = cross_entropy(&probs, &yb);
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: "loss diverged to a non-finite value".into(),
                });
            }
            // d(mean CE)/d(logits) = (p - onehot) / batch_size
            let mut dlogits = probs;
            let inv_n = S::one() / S::from_usize_c(yb.len());
            for (r, &yv) in yb.iter().enumerate() {
                let v = dlogits.get(r, yv);
                dlogits.set(r, yv, v - S::one());
            }
            for v in dlogits.data_mut() {
                *v = *v * inv_n;
            }
            let (_, grads) = model.backward(&trace, &dlogits);
            adam.update(&mut model, &grads, config.learning_rate);
        }

        let val_f1 = if y_val.is_empty() {
            0.0
        } else {
            let preds = model.predict(&x_val)?;
            macro_f1(&y_val, &preds, spec.n_classes)
        };
        if val_f1 > best_f1 {
            best_f1 = val_f1;
            best_layers = model.layers.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
        }
        if let Some(target) = config.target_f1 {
            if best_f1 >= target {
                break;
            }
        }
        if epochs_since_best >= config.patience {
            break;
        }
    }

    model.layers = best_layers;
    let cost = cost_profile(spec)?;
    // forward + backward ~ 3x the forward cost, per training row per epoch
    let train_flops =
        3.0 * cost.flops_per_forward as f64 * train_idx.len() as f64 * epochs_run as f64;
    model.stats = TrainingStats {
        epochs_run,
        wall_clock_seconds: train_flops / config.throughput_flops_per_sec,
        final_f1: best_f1.max(0.0),
        seed,
    };
    Ok(model)
}
