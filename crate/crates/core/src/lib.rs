//! Responsibility scoring engine for tabular classifiers.
//!
//! The crate trains small reference neural models, evaluates 21 metrics
//! across four dimensions (explainability, fairness, sustainability,
//! robustness), normalizes them to the unit interval, and aggregates them
//! into per-dimension scores and a single responsibility score. All core
//! numerics are generic over the scalar type; the `f64` aliases below are
//! what the pipeline and CLI use.

pub mod data;
pub mod error;
pub mod explain;
pub mod fairness;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod robust;
pub mod scalar;
pub mod scoring;
pub mod stats;
pub mod sustain;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default dense matrix used by the pipeline.
pub type Mat = linalg::Matrix<f64>;
/// Single-precision matrix alias.
pub type Mat32 = linalg::Matrix<f32>;
/// Default trained model used by the pipeline.
pub type Model = model::TrainedModel<f64>;
/// Single-precision model alias.
pub type Model32 = model::TrainedModel<f32>;
