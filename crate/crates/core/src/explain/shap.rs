//! Kernel SHAP: Shapley-kernel-weighted least squares over sampled feature
//! coalitions, with masked features replaced by background rows.
//!
//! The two sum constraints (empty and full coalition) are eliminated
//! algebraically rather than approximated with large weights, so local
//! accuracy `base + Σ phi = f(x)` holds by construction. When the coalition
//! budget covers every strict subset the solve enumerates them all and the
//! result is the exact Shapley value.

use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{weighted_least_squares, Matrix};
use crate::rng;
use crate::scalar::{sc, Scalar};

/// Per-sample, per-feature attributions for one explained output.
#[derive(Debug, Clone)]
pub struct AttributionMatrix<S> {
    /// `(n_samples x n_features)`.
    pub values: Matrix<S>,
    /// Expected model output over the background set.
    pub base_value: S,
    /// Model output per explained row (local-accuracy right-hand side).
    pub outputs: Vec<S>,
    pub target_class: usize,
    /// Fingerprint of the background sample set used for masking.
    pub background_ref: u64,
    /// Rows whose weighted system was singular and solved with a ridge.
    pub regularized_rows: Vec<usize>,
}

impl<S: Scalar> AttributionMatrix<S> {
    /// Largest violation of `base + Σ phi = f(x)` over all rows.
    pub fn local_accuracy_error(&self) -> S {
        let mut worst = S::zero();
        for (r, &fx) in self.outputs.iter().enumerate() {
            let total: S = self.values.row(r).iter().copied().sum();
            let err = (self.base_value + total - fx).abs();
            if err > worst {
                worst = err;
            }
        }
        worst
    }
}

/// Fingerprint of a matrix's contents (bit patterns, order-sensitive).
pub fn matrix_fingerprint<S: Scalar>(m: &Matrix<S>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |v: u64| {
        h ^= v;
        h = h.wrapping_mul(0x1000_0000_01b3);
    };
    mix(m.rows() as u64);
    mix(m.cols() as u64);
    for v in m.data() {
        mix(v.to_f64_c().to_bits());
    }
    h
}

/// Kernel SHAP explainer around a batched scalar-output function.
pub struct ShapExplainer<S, F>
where
    F: Fn(&Matrix<S>) -> Result<Vec<S>>,
{
    f: F,
    background: Matrix<S>,
    n_coalitions: usize,
    base_value: S,
    background_ref: u64,
    target_class: usize,
}

impl<S: Scalar, F> ShapExplainer<S, F>
where
    F: Fn(&Matrix<S>) -> Result<Vec<S>>,
{
    /// `n_coalitions` must be at least `2 * n_features + 2`.
    pub fn new(f: F, background: Matrix<S>, n_coalitions: usize, target_class: usize) -> Result<Self> {
        if background.rows() == 0 {
            return Err(Error::Config("background set must be nonempty".into()));
        }
        let d = background.cols();
        if n_coalitions < 2 * d + 2 {
            return Err(Error::Config(format!(
                "n_coalitions {} below the minimum {} for {} features",
                n_coalitions,
                2 * d + 2,
                d
            )));
        }
        let bg_outputs = f(&background)?;
        let base_value =
            bg_outputs.iter().copied().sum::<S>() / S::from_usize_c(background.rows());
        let background_ref = matrix_fingerprint(&background);
        Ok(ShapExplainer {
            f,
            background,
            n_coalitions,
            base_value,
            background_ref,
            target_class,
        })
    }

    pub fn base_value(&self) -> S {
        self.base_value
    }

    pub fn n_features(&self) -> usize {
        self.background.cols()
    }

    /// Background mean per feature (the faithfulness baseline).
    pub fn background_mean(&self) -> Vec<S> {
        let n = S::from_usize_c(self.background.rows());
        let mut mean = vec![S::zero(); self.background.cols()];
        for row in self.background.row_iter() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        for m in &mut mean {
            *m = *m / n;
        }
        mean
    }

    /// Explain every row of `x`; per-row substreams keep the result
    /// independent of evaluation order.
    pub fn explain(&self, x: &Matrix<S>, seed: u64) -> Result<AttributionMatrix<S>> {
        let d = self.background.cols();
        if x.cols() != d {
            return Err(Error::Shape(format!(
                "explained rows have {} features, background has {}",
                x.cols(),
                d
            )));
        }
        let outputs = (self.f)(x)?;
        let mut values = Matrix::zeros(x.rows(), d);
        let mut regularized_rows = Vec::new();
        for r in 0..x.rows() {
            let label = r.to_string();
            let mut row_rng = rng::stream(seed, &["shap", &label]);
            let (phi, regularized) = self.explain_row(x.row(r), outputs[r], &mut row_rng)?;
            values.row_mut(r).copy_from_slice(&phi);
            if regularized {
                regularized_rows.push(r);
            }
        }
        Ok(AttributionMatrix {
            values,
            base_value: self.base_value,
            outputs,
            target_class: self.target_class,
            background_ref: self.background_ref,
            regularized_rows,
        })
    }

    fn explain_row(&self, x: &[S], fx: S, rng: &mut ChaCha8Rng) -> Result<(Vec<S>, bool)> {
        let d = x.len();
        if d == 1 {
            return Ok((vec![fx - self.base_value], false));
        }

        let budget = self.n_coalitions - 2;
        let all_strict = (d < 63).then(|| (1u64 << d) - 2);
        let (coalitions, weights) = match all_strict {
            Some(total) if total as usize <= budget => enumerate_coalitions(d),
            _ => sample_coalitions(d, budget, rng),
        };

        // Masked evaluations, averaged over the background set.
        let n_bg = self.background.rows();
        let mut masked = Matrix::zeros(coalitions.len() * n_bg, d);
        for (ci, coalition) in coalitions.iter().enumerate() {
            for b in 0..n_bg {
                let bg_row = self.background.row(b);
                let out = masked.row_mut(ci * n_bg + b);
                for j in 0..d {
                    out[j] = if coalition & (1u64 << j) != 0 {
                        x[j]
                    } else {
                        bg_row[j]
                    };
                }
            }
        }
        let masked_outputs = (self.f)(&masked)?;
        let inv_bg = S::one() / S::from_usize_c(n_bg);
        let v: Vec<S> = (0..coalitions.len())
            .map(|ci| {
                masked_outputs[ci * n_bg..(ci + 1) * n_bg]
                    .iter()
                    .copied()
                    .sum::<S>()
                    * inv_bg
            })
            .collect();

        // Eliminate the sum constraint through the last feature:
        // phi_last = (fx - base) - Σ_{j<last} phi_j.
        let last = d - 1;
        let gap = fx - self.base_value;
        let mut design = Matrix::zeros(coalitions.len(), last);
        let mut targets = Vec::with_capacity(coalitions.len());
        for (ci, coalition) in coalitions.iter().enumerate() {
            let z_last = if coalition & (1u64 << last) != 0 {
                S::one()
            } else {
                S::zero()
            };
            let row = design.row_mut(ci);
            for (j, slot) in row.iter_mut().enumerate() {
                let z_j = if coalition & (1u64 << j) != 0 {
                    S::one()
                } else {
                    S::zero()
                };
                *slot = z_j - z_last;
            }
            targets.push(v[ci] - self.base_value - z_last * gap);
        }

        let sol = weighted_least_squares(&design, &targets, &weights)?;
        let mut phi = sol.coefficients;
        let partial: S = phi.iter().copied().sum();
        phi.push(gap - partial);
        Ok((phi, sol.regularized))
    }
}

/// Every strict subset with the exact Shapley kernel weight
/// `(d-1) / (C(d,k) * k * (d-k))`.
fn enumerate_coalitions<S: Scalar>(d: usize) -> (Vec<u64>, Vec<S>) {
    let total = (1u64 << d) - 1;
    let mut coalitions = Vec::with_capacity((total - 1) as usize);
    let mut weights = Vec::with_capacity((total - 1) as usize);
    for z in 1..total {
        let k = z.count_ones() as usize;
        coalitions.push(z);
        weights.push(sc::<S>(
            (d as f64 - 1.0) / (binomial(d, k) * k as f64 * (d - k) as f64),
        ));
    }
    (coalitions, weights)
}

/// Paired sampling: uniform size, uniform subset, plus its complement.
/// Importance weight `(d-1) / (k (d-k))` folds the kernel against the
/// uniform proposal.
fn sample_coalitions<S: Scalar>(
    d: usize,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<u64>, Vec<S>) {
    let mut coalitions = Vec::with_capacity(budget);
    let mut weights = Vec::with_capacity(budget);
    let full = (1u64 << d) - 1;
    while coalitions.len() + 2 <= budget {
        let k = rng.random_range(1..d);
        let subset = index_sample(rng, d, k);
        let mut z = 0u64;
        for j in subset {
            z |= 1 << j;
        }
        let w = sc::<S>((d as f64 - 1.0) / (k as f64 * (d - k) as f64));
        coalitions.push(z);
        weights.push(w);
        coalitions.push(full ^ z);
        weights.push(w);
    }
    (coalitions, weights)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Batched probability of one class, for explaining classifiers.
pub fn class_probability<'m, S: Scalar>(
    model: &'m crate::model::TrainedModel<S>,
    class: usize,
) -> impl Fn(&Matrix<S>) -> Result<Vec<S>> + 'm {
    move |x: &Matrix<S>| {
        let probs = model.predict_proba(x)?;
        Ok((0..probs.rows()).map(|r| probs.get(r, class)).collect())
    }
}
