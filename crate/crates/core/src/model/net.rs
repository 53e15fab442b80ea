//! Forward and backward passes for both architectures.
//!
//! Backprop is written out by hand; the trace stores exactly the activations
//! each architecture needs. Dropout only exists during training forward
//! passes, so every metric-facing gradient is evaluated in deterministic
//! eval mode.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{sc, Scalar};

use super::{softmax_rows, Architecture, DenseLayer, TrainedModel};

/// What to differentiate with respect to the inputs.
pub enum GradientTarget<'a> {
    /// Per-sample cross-entropy loss against the given labels.
    Loss { labels: &'a [usize] },
    /// Raw logit of one class.
    Logit { class: usize },
    /// Softmax probability of one class.
    Probability { class: usize },
}

/// Inverted-dropout masks for one training forward pass.
pub(super) struct DropoutCtx<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub rates: Vec<f64>,
}

pub(super) enum Trace<S> {
    Mlp {
        /// Input to each dense layer, length n_layers.
        layer_inputs: Vec<Matrix<S>>,
        /// Pre-activation outputs of the hidden layers, length n_layers - 1.
        preacts: Vec<Matrix<S>>,
        /// Post-activation dropout masks (train mode only).
        masks: Vec<Option<Matrix<S>>>,
    },
    Resnet {
        input: Matrix<S>,
        /// Stream value entering each block, plus the final one (len n_blocks + 1).
        h: Vec<Matrix<S>>,
        /// First-linear pre-activation per block.
        u: Vec<Matrix<S>>,
        /// Input to the second linear per block (post-activation, post-dropout).
        rd: Vec<Matrix<S>>,
        hidden_masks: Vec<Option<Matrix<S>>>,
        residual_masks: Vec<Option<Matrix<S>>>,
    },
}

pub(super) struct LayerGrad<S> {
    pub d_weight: Matrix<S>,
    pub d_bias: Vec<S>,
}

fn relu<S: Scalar>(m: &Matrix<S>) -> Matrix<S> {
    m.map(|v| if v > S::zero() { v } else { S::zero() })
}

fn relu_mask_mul<S: Scalar>(grad: &mut Matrix<S>, preact: &Matrix<S>) {
    for (g, &z) in grad.data_mut().iter_mut().zip(preact.data()) {
        if z <= S::zero() {
            *g = S::zero();
        }
    }
}

fn draw_mask<S: Scalar>(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha8Rng) -> Matrix<S> {
    let keep = 1.0 - rate;
    let scale = sc::<S>(1.0 / keep);
    let mut mask = Matrix::zeros(rows, cols);
    for v in mask.data_mut() {
        let u: f64 = rng.random_range(0.0..1.0);
        *v = if u < keep { scale } else { S::zero() };
    }
    mask
}

fn apply_mask<S: Scalar>(m: &mut Matrix<S>, mask: &Matrix<S>) {
    for (v, &s) in m.data_mut().iter_mut().zip(mask.data()) {
        *v = *v * s;
    }
}

fn column_sums<S: Scalar>(m: &Matrix<S>) -> Vec<S> {
    let mut out = vec![S::zero(); m.cols()];
    for r in 0..m.rows() {
        for (o, &v) in out.iter_mut().zip(m.row(r)) {
            *o = *o + v;
        }
    }
    out
}

fn dense_forward<S: Scalar>(x: &Matrix<S>, layer: &DenseLayer<S>) -> Matrix<S> {
    let mut z = x.matmul(&layer.weight);
    z.add_row_bias(&layer.bias);
    z
}

impl<S: Scalar> TrainedModel<S> {
    pub(super) fn forward_trace(
        &self,
        x: &Matrix<S>,
        mut dropout: Option<&mut DropoutCtx<'_>>,
    ) -> (Matrix<S>, Trace<S>) {
        match self.spec.architecture {
            Architecture::Mlp => {
                let n_dense = self.layers.len();
                let mut layer_inputs = Vec::with_capacity(n_dense);
                let mut preacts = Vec::with_capacity(n_dense.saturating_sub(1));
                let mut masks = Vec::with_capacity(n_dense.saturating_sub(1));
                let mut a = x.clone();
                for (idx, layer) in self.layers.iter().enumerate() {
                    layer_inputs.push(a.clone());
                    let z = dense_forward(&a, layer);
                    if idx + 1 == n_dense {
                        return (
                            z,
                            Trace::Mlp {
                                layer_inputs,
                                preacts,
                                masks,
                            },
                        );
                    }
                    let mut h = relu(&z);
                    preacts.push(z);
                    let mask = match dropout.as_deref_mut() {
                        Some(ctx) if ctx.rates.get(idx).copied().unwrap_or(0.0) > 0.0 => {
                            let m = draw_mask(h.rows(), h.cols(), ctx.rates[idx], ctx.rng);
                            apply_mask(&mut h, &m);
                            Some(m)
                        }
                        _ => None,
                    };
                    masks.push(mask);
                    a = h;
                }
                unreachable!("mlp always has a final layer");
            }
            Architecture::TabResnet => {
                let n_blocks = self.spec.n_blocks;
                let (hidden_rate, residual_rate) = match self.spec.dropout_rates.as_slice() {
                    [h, r] => (*h, *r),
                    _ => (0.0, 0.0),
                };
                let mut h = vec![dense_forward(x, &self.layers[0])];
                let mut u = Vec::with_capacity(n_blocks);
                let mut rd = Vec::with_capacity(n_blocks);
                let mut hidden_masks = Vec::with_capacity(n_blocks);
                let mut residual_masks = Vec::with_capacity(n_blocks);
                for b in 0..n_blocks {
                    let h_in = h[b].clone();
                    let first = &self.layers[1 + 2 * b];
                    let second = &self.layers[2 + 2 * b];
                    let ub = dense_forward(&h_in, first);
                    let mut r = relu(&ub);
                    let hm = match dropout.as_deref_mut() {
                        Some(ctx) if hidden_rate > 0.0 => {
                            let m = draw_mask(r.rows(), r.cols(), hidden_rate, ctx.rng);
                            apply_mask(&mut r, &m);
                            Some(m)
                        }
                        _ => None,
                    };
                    let mut v = dense_forward(&r, second);
                    let rm = match dropout.as_deref_mut() {
                        Some(ctx) if residual_rate > 0.0 => {
                            let m = draw_mask(v.rows(), v.cols(), residual_rate, ctx.rng);
                            apply_mask(&mut v, &m);
                            Some(m)
                        }
                        _ => None,
                    };
                    let mut h_out = h_in;
                    for (o, &dv) in h_out.data_mut().iter_mut().zip(v.data()) {
                        *o = *o + dv;
                    }
                    u.push(ub);
                    rd.push(r);
                    hidden_masks.push(hm);
                    residual_masks.push(rm);
                    h.push(h_out);
                }
                let logits = dense_forward(&h[n_blocks], self.layers.last().unwrap());
                (
                    logits,
                    Trace::Resnet {
                        input: x.clone(),
                        h,
                        u,
                        rd,
                        hidden_masks,
                        residual_masks,
                    },
                )
            }
        }
    }

    /// Gradients of a scalar-per-sample objective wrt inputs and parameters,
    /// given the objective's gradient wrt the logits.
    pub(super) fn backward(
        &self,
        trace: &Trace<S>,
        dlogits: &Matrix<S>,
    ) -> (Matrix<S>, Vec<LayerGrad<S>>) {
        match trace {
            Trace::Mlp {
                layer_inputs,
                preacts,
                masks,
            } => {
                let n_dense = self.layers.len();
                let mut grads: Vec<Option<LayerGrad<S>>> = (0..n_dense).map(|_| None).collect();
                let mut delta = dlogits.clone();
                for idx in (0..n_dense).rev() {
                    let a_in = &layer_inputs[idx];
                    grads[idx] = Some(LayerGrad {
                        d_weight: a_in.transpose_matmul(&delta),
                        d_bias: column_sums(&delta),
                    });
                    if idx == 0 {
                        delta = delta.matmul_transpose(&self.layers[idx].weight);
                        break;
                    }
                    let mut da = delta.matmul_transpose(&self.layers[idx].weight);
                    if let Some(mask) = &masks[idx - 1] {
                        apply_mask(&mut da, mask);
                    }
                    relu_mask_mul(&mut da, &preacts[idx - 1]);
                    delta = da;
                }
                (delta, grads.into_iter().map(Option::unwrap).collect())
            }
            Trace::Resnet {
                input,
                h,
                u,
                rd,
                hidden_masks,
                residual_masks,
            } => {
                let n_blocks = self.spec.n_blocks;
                let head_idx = self.layers.len() - 1;
                let mut grads: Vec<Option<LayerGrad<S>>> =
                    (0..self.layers.len()).map(|_| None).collect();

                grads[head_idx] = Some(LayerGrad {
                    d_weight: h[n_blocks].transpose_matmul(dlogits),
                    d_bias: column_sums(dlogits),
                });
                let mut dh = dlogits.matmul_transpose(&self.layers[head_idx].weight);

                for b in (0..n_blocks).rev() {
                    let first_idx = 1 + 2 * b;
                    let second_idx = 2 + 2 * b;
                    let mut dv = dh.clone();
                    if let Some(mask) = &residual_masks[b] {
                        apply_mask(&mut dv, mask);
                    }
                    grads[second_idx] = Some(LayerGrad {
                        d_weight: rd[b].transpose_matmul(&dv),
                        d_bias: column_sums(&dv),
                    });
                    let mut dr = dv.matmul_transpose(&self.layers[second_idx].weight);
                    if let Some(mask) = &hidden_masks[b] {
                        apply_mask(&mut dr, mask);
                    }
                    relu_mask_mul(&mut dr, &u[b]);
                    grads[first_idx] = Some(LayerGrad {
                        d_weight: h[b].transpose_matmul(&dr),
                        d_bias: column_sums(&dr),
                    });
                    let dskip = dr.matmul_transpose(&self.layers[first_idx].weight);
                    for (o, &v) in dh.data_mut().iter_mut().zip(dskip.data()) {
                        *o = *o + v;
                    }
                }

                grads[0] = Some(LayerGrad {
                    d_weight: input.transpose_matmul(&dh),
                    d_bias: column_sums(&dh),
                });
                let dx = dh.matmul_transpose(&self.layers[0].weight);
                (dx, grads.into_iter().map(Option::unwrap).collect())
            }
        }
    }

    /// Smallest |pre-activation| over all ReLU sites for the given inputs.
    ///
    /// Finite-difference gradient checks are only valid when no hidden unit
    /// switches sign inside the probe step; callers use this margin to
    /// re-draw inputs that sit too close to a kink.
    pub fn relu_preactivation_margin(&self, x: &Matrix<S>) -> S {
        let (_, trace) = self.forward_trace(x, None);
        let mut margin = S::infinity();
        let scan = |ms: &[Matrix<S>], margin: &mut S| {
            for m in ms {
                for v in m.data() {
                    if v.abs() < *margin {
                        *margin = v.abs();
                    }
                }
            }
        };
        match &trace {
            Trace::Mlp { preacts, .. } => scan(preacts, &mut margin),
            Trace::Resnet { u, .. } => scan(u, &mut margin),
        }
        margin
    }

    fn check_input(&self, x: &Matrix<S>) -> Result<()> {
        if x.cols() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                x.cols(),
                self.spec.input_dim
            )));
        }
        for (i, row) in x.row_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    index: i,
                    message: "non-finite input feature".into(),
                });
            }
        }
        Ok(())
    }

    /// Raw class scores, eval mode.
    pub fn logits(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        self.check_input(x)?;
        Ok(self.forward_trace(x, None).0)
    }

    /// Softmax class probabilities; rows sum to 1 and every entry is in (0,1).
    pub fn predict_proba(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        Ok(softmax_rows(&self.logits(x)?))
    }

    /// Argmax class per row.
    pub fn predict(&self, x: &Matrix<S>) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok((0..logits.rows())
            .map(|r| {
                let row = logits.row(r);
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }

    /// Analytic gradient of the target wrt each input row.
    ///
    /// Row i of the result is d(target_i)/d(x_i) for that sample's own
    /// objective (per-sample loss, logit, or probability).
    pub fn input_gradient(&self, x: &Matrix<S>, target: GradientTarget<'_>) -> Result<Matrix<S>> {
        self.check_input(x)?;
        let k = self.spec.n_classes;
        let (logits, trace) = self.forward_trace(x, None);
        let dlogits = match target {
            GradientTarget::Loss { labels } => {
                if labels.len() != x.rows() {
                    return Err(Error::Shape(format!(
                        "{} labels for {} rows",
                        labels.len(),
                        x.rows()
                    )));
                }
                if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
                    return Err(Error::Config(format!(
                        "label {} out of range for {} classes",
                        bad, k
                    )));
                }
                let probs = softmax_rows(&logits);
                let mut d = probs;
                for (r, &y) in labels.iter().enumerate() {
                    let v = d.get(r, y);
                    d.set(r, y, v - S::one());
                }
                d
            }
            GradientTarget::Logit { class } => {
                if class >= k {
                    return Err(Error::Config(format!("class {} out of range", class)));
                }
                let mut d = Matrix::zeros(x.rows(), k);
                for r in 0..x.rows() {
                    d.set(r, class, S::one());
                }
                d
            }
            GradientTarget::Probability { class } => {
                if class >= k {
                    return Err(Error::Config(format!("class {} out of range", class)));
                }
                let probs = softmax_rows(&logits);
                let mut d = Matrix::zeros(x.rows(), k);
                for r in 0..x.rows() {
                    let pc = probs.get(r, class);
                    for c in 0..k {
                        let indicator = if c == class { S::one() } else { S::zero() };
                        d.set(r, c, pc * (indicator - probs.get(r, c)));
                    }
                }
                d
            }
        };
        let (dx, _) = self.backward(&trace, &dlogits);
        for (i, row) in dx.row_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    index: i,
                    message: "non-finite input gradient".into(),
                });
            }
        }
        Ok(dx)
    }
}
