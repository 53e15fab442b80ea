//! Reference differentiable classifiers: a plain MLP and a tabular residual
//! network, with seeded training, analytic input gradients, parameter
//! randomization, and deterministic cost counting.

mod io;
mod net;
mod train;

pub use io::{load_json, save_json};
pub use net::GradientTarget;
pub use train::{train, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Mlp,
    TabResnet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// Architecture description; parameter shapes derive entirely from this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub input_dim: usize,
    /// Hidden widths for `mlp`; empty means a single linear layer.
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    /// Residual block count for `tab_resnet`.
    #[serde(default)]
    pub n_blocks: usize,
    /// Residual block width for `tab_resnet`.
    #[serde(default)]
    pub block_dim: usize,
    pub n_classes: usize,
    #[serde(default)]
    pub activation: Activation,
    /// `mlp`: one rate per hidden layer (or empty). `tab_resnet`: two rates
    /// (after the activation, after the residual branch) or empty.
    #[serde(default)]
    pub dropout_rates: Vec<f64>,
}

impl ModelSpec {
    /// Default MLP: one hidden layer of 50 ReLU units, no dropout.
    pub fn mlp(input_dim: usize, n_classes: usize) -> Self {
        ModelSpec {
            architecture: Architecture::Mlp,
            input_dim,
            hidden_dims: vec![50],
            n_blocks: 0,
            block_dim: 0,
            n_classes,
            activation: Activation::Relu,
            dropout_rates: vec![],
        }
    }

    pub fn mlp_with_hidden(input_dim: usize, hidden_dims: Vec<usize>, n_classes: usize) -> Self {
        ModelSpec {
            hidden_dims,
            ..ModelSpec::mlp(input_dim, n_classes)
        }
    }

    /// Default tabular ResNet: 2 residual blocks of width 16 with ReLU and
    /// dropout 0.2 after the activation, 0.05 on the residual branch.
    pub fn tab_resnet(input_dim: usize, n_classes: usize) -> Self {
        ModelSpec {
            architecture: Architecture::TabResnet,
            input_dim,
            hidden_dims: vec![],
            n_blocks: 2,
            block_dim: 16,
            n_classes,
            activation: Activation::Relu,
            dropout_rates: vec![0.2, 0.05],
        }
    }

    /// Single linear layer (no hidden units); handy for closed-form oracles.
    pub fn linear(input_dim: usize, n_classes: usize) -> Self {
        ModelSpec::mlp_with_hidden(input_dim, vec![], n_classes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 {
            return Err(Error::Config("input_dim must be >= 1".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config("n_classes must be >= 2".into()));
        }
        match self.architecture {
            Architecture::Mlp => {
                if self.hidden_dims.contains(&0) {
                    return Err(Error::Config("every hidden dimension must be >= 1".into()));
                }
                if !self.dropout_rates.is_empty()
                    && self.dropout_rates.len() != self.hidden_dims.len()
                {
                    return Err(Error::Config(
                        "mlp dropout_rates must be empty or one per hidden layer".into(),
                    ));
                }
            }
            Architecture::TabResnet => {
                if self.n_blocks == 0 || self.block_dim == 0 {
                    return Err(Error::Config(
                        "tab_resnet needs n_blocks >= 1 and block_dim >= 1".into(),
                    ));
                }
                if !self.dropout_rates.is_empty() && self.dropout_rates.len() != 2 {
                    return Err(Error::Config(
                        "tab_resnet dropout_rates must be empty or [hidden, residual]".into(),
                    ));
                }
            }
        }
        if self
            .dropout_rates
            .iter()
            .any(|&p| !(0.0..1.0).contains(&p))
        {
            return Err(Error::Config("dropout rates must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// (in, out) shape of every dense layer, in forward order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        match self.architecture {
            Architecture::Mlp => {
                let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
                let mut prev = self.input_dim;
                for &h in &self.hidden_dims {
                    dims.push((prev, h));
                    prev = h;
                }
                dims.push((prev, self.n_classes));
                dims
            }
            Architecture::TabResnet => {
                let d = self.block_dim;
                let mut dims = vec![(self.input_dim, d)];
                for _ in 0..self.n_blocks {
                    dims.push((d, d));
                    dims.push((d, d));
                }
                dims.push((d, self.n_classes));
                dims
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    pub epochs_run: usize,
    /// Deterministic training-time estimate (see [`train::TrainConfig`]):
    /// total training FLOPs divided by the configured reference throughput.
    pub wall_clock_seconds: f64,
    pub final_f1: f64,
    pub seed: u64,
}

impl TrainingStats {
    pub fn untrained(seed: u64) -> Self {
        TrainingStats {
            epochs_run: 0,
            wall_clock_seconds: 0.0,
            final_f1: 0.0,
            seed,
        }
    }
}

/// One dense layer; `weight` is `(in_dim x out_dim)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<S> {
    pub weight: Matrix<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> DenseLayer<S> {
    /// Uniform Kaiming-style fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let mut weight = Matrix::zeros(in_dim, out_dim);
        for v in weight.data_mut() {
            *v = rng::uniform(rng, -bound, bound);
        }
        let bias = (0..out_dim)
            .map(|_| rng::uniform(rng, -bound, bound))
            .collect();
        DenseLayer { weight, bias }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            weight: Matrix::zeros(in_dim, out_dim),
            bias: vec![S::zero(); out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// A trained (or hand-built) classifier with inspectable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<S> {
    pub spec: ModelSpec,
    pub layers: Vec<DenseLayer<S>>,
    pub stats: TrainingStats,
}

impl<S: Scalar> TrainedModel<S> {
    /// Freshly initialized (untrained) model for the given spec and seed.
    pub fn initialized(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut r = rng::stream(seed, &["init"]);
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(i, o)| DenseLayer::init(i, o, &mut r))
            .collect();
        Ok(TrainedModel {
            spec: spec.clone(),
            layers,
            stats: TrainingStats::untrained(seed),
        })
    }

    /// Build a model directly from parameter blocks (validated).
    pub fn from_layers(spec: ModelSpec, layers: Vec<DenseLayer<S>>) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        if dims.len() != layers.len() {
            return Err(Error::Shape(format!(
                "spec expects {} dense layers, got {}",
                dims.len(),
                layers.len()
            )));
        }
        for (idx, ((i, o), layer)) in dims.iter().zip(&layers).enumerate() {
            if layer.in_dim() != *i || layer.out_dim() != *o || layer.bias.len() != *o {
                return Err(Error::Shape(format!(
                    "layer {} must be {}x{}, got {}x{}",
                    idx,
                    i,
                    o,
                    layer.in_dim(),
                    layer.out_dim()
                )));
            }
            if !layer.weight.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::Config(format!("layer {} has non-finite parameters", idx)));
            }
        }
        Ok(TrainedModel {
            spec,
            layers,
            stats: TrainingStats::untrained(0),
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostProfile {
    pub parameter_count: u64,
    pub flops_per_forward: u64,
    pub macs_per_forward: u64,
}

/// Deterministic cost counts for one single-sample forward pass.
///
/// Convention: MACs = sum of in*out over dense layers; FLOPs = 2*MACs plus
/// one add per bias element. Activations, softmax, and residual adds are
/// excluded.
pub fn cost_profile(spec: &ModelSpec) -> Result<CostProfile> {
    spec.validate()?;
    let mut params = 0u64;
    let mut macs = 0u64;
    let mut bias_adds = 0u64;
    for (i, o) in spec.layer_dims() {
        params += (i as u64) * (o as u64) + o as u64;
        macs += (i as u64) * (o as u64);
        bias_adds += o as u64;
    }
    Ok(CostProfile {
        parameter_count: params,
        flops_per_forward: 2 * macs + bias_adds,
        macs_per_forward: macs,
    })
}

impl CostProfile {
    /// True when every counter is strictly smaller than `other`'s.
    pub fn strictly_smaller_than(&self, other: &CostProfile) -> bool {
        self.parameter_count < other.parameter_count
            && self.flops_per_forward < other.flops_per_forward
            && self.macs_per_forward < other.macs_per_forward
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomizeMode {
    /// Re-draw every parameter block.
    AllLayers,
    /// Re-draw the top `steps` layers (output side); the first
    /// `n_layers - steps` layers keep their trained values bit-for-bit.
    TopDown { steps: usize },
}

/// Fresh model with selected layers re-drawn from the training initializer.
///
/// Per-layer substreams keep a cascade consistent: step k and step k+1
/// randomize their shared layers identically.
pub fn randomize_parameters<S: Scalar>(
    model: &TrainedModel<S>,
    mode: RandomizeMode,
    seed: u64,
) -> TrainedModel<S> {
    let n = model.n_layers();
    let start = match mode {
        RandomizeMode::AllLayers => 0,
        RandomizeMode::TopDown { steps } => n.saturating_sub(steps),
    };
    let mut out = model.clone();
    for idx in start..n {
        let label = idx.to_string();
        let mut r = rng::stream(seed, &["randomize", &label]);
        let layer = &model.layers[idx];
        out.layers[idx] = DenseLayer::init(layer.in_dim(), layer.out_dim(), &mut r);
    }
    out
}

/// Row-wise softmax with underflow floor so every probability stays in (0,1).
pub fn softmax_rows<S: Scalar>(logits: &Matrix<S>) -> Matrix<S> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    let floor = S::min_positive_value();
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let mut sum = S::zero();
        {
            let orow = out.row_mut(r);
            for (o, &z) in orow.iter_mut().zip(row) {
                let e = (z - max).exp().max(floor);
                *o = e;
                sum = sum + e;
            }
            for o in orow.iter_mut() {
                *o = *o / sum;
            }
        }
    }
    out
}

/// Mean cross-entropy of softmax probabilities against class labels.
pub fn cross_entropy<S: Scalar>(probs: &Matrix<S>, labels: &[usize]) -> S {
    debug_assert_eq!(probs.rows(), labels.len());
    let mut total = S::zero();
    for (r, &y) in labels.iter().enumerate() {
        total = total - probs.get(r, y).ln();
    }
    total / S::from_usize_c(labels.len().max(1))
}
