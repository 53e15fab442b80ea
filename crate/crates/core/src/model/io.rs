//! Model persistence: a versioned JSON document with decimal parameter
//! arrays (row-major). serde_json prints floats with round-trip precision,
//! so save/load is bit-exact for f64 parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{sc, Scalar};

use super::{DenseLayer, ModelSpec, TrainedModel, TrainingStats};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `(in_dim x out_dim)` weights as decimal numbers.
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    spec: ModelSpec,
    layers: Vec<LayerDoc>,
    training_stats: TrainingStats,
}

pub fn save_json<S: Scalar>(model: &TrainedModel<S>) -> Result<String> {
    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        spec: model.spec.clone(),
        layers: model
            .layers
            .iter()
            .map(|l| LayerDoc {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                weight: l.weight.data().iter().map(|v| v.to_f64_c()).collect(),
                bias: l.bias.iter().map(|v| v.to_f64_c()).collect(),
            })
            .collect(),
        training_stats: model.stats.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn load_json<S: Scalar>(text: &str) -> Result<TrainedModel<S>> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported model format_version {} (expected {})",
            doc.format_version, FORMAT_VERSION
        )));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (idx, l) in doc.layers.iter().enumerate() {
        if l.weight.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
            return Err(Error::Shape(format!(
                "layer {} arrays do not match {}x{}",
                idx, l.in_dim, l.out_dim
            )));
        }
        let weight = Matrix::from_vec(
            l.in_dim,
            l.out_dim,
            l.weight.iter().map(|&v| sc::<S>(v)).collect(),
        )?;
        layers.push(DenseLayer {
            weight,
            bias: l.bias.iter().map(|&v| sc::<S>(v)).collect(),
        });
    }
    let mut model = TrainedModel::from_layers(doc.spec, layers)?;
    model.stats = doc.training_stats;
    Ok(model)
}
