//! Feature encoding: train-statistic standardization for numerics, one-hot
//! in declared category order for categoricals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{sc, Scalar};

use super::{Cell, ColumnKind, TabularDataset};

#[derive(Debug, Clone)]
pub struct EncodeOptions {
    /// Keep the sensitive attribute as a model feature (it always remains
    /// the grouping key for fairness metrics).
    pub include_sensitive_feature: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            include_sensitive_feature: true,
        }
    }
}

/// Per-column statistics fitted on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    pub numeric: Vec<NumericEncoder>,
    pub categorical: Vec<CategoricalEncoder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericEncoder {
    pub column: String,
    pub mean: f64,
    /// Population standard deviation of the train rows; 0 for constants.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoder {
    pub column: String,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct EncodedSplit<S> {
    pub x_train: Matrix<S>,
    pub x_test: Matrix<S>,
    pub y_train: Vec<usize>,
    pub y_test: Vec<usize>,
    /// Group membership of the test rows (true = privileged).
    pub group_test: Vec<bool>,
    pub feature_names: Vec<String>,
    pub encoder: EncoderState,
    pub warnings: Vec<String>,
}

impl<S: Scalar> EncodedSplit<S> {
    pub fn n_features(&self) -> usize {
        self.x_train.cols()
    }
}

/// Encode train/test rows; all statistics come from the train rows only.
pub fn encode_and_standardize<S: Scalar>(
    dataset: &TabularDataset,
    train_indices: &[usize],
    test_indices: &[usize],
    options: &EncodeOptions,
) -> Result<EncodedSplit<S>> {
    let n = dataset.n_rows();
    for &i in train_indices.iter().chain(test_indices) {
        if i >= n {
            return Err(Error::Config(format!("index {} out of range ({} rows)", i, n)));
        }
    }
    let overlap: std::collections::HashSet<_> = train_indices.iter().collect();
    if test_indices.iter().any(|i| overlap.contains(i)) {
        return Err(Error::Config("train and test indices overlap".into()));
    }

    let schema = &dataset.schema;
    let mut warnings = Vec::new();
    let mut feature_names = Vec::new();
    let mut numeric_encoders = Vec::new();
    let mut categorical_encoders = Vec::new();

    // Column plan: (schema index, encoder) in schema order.
    enum Plan {
        Numeric { col: usize, mean: f64, std: f64 },
        OneHot { col: usize, n_cats: usize },
    }
    let mut plan = Vec::new();
    for (ci, col) in schema.columns.iter().enumerate() {
        if col.name == schema.label_column {
            continue;
        }
        if col.name == schema.sensitive_column && !options.include_sensitive_feature {
            continue;
        }
        match col.kind {
            ColumnKind::Numeric => {
                let values: Vec<f64> = train_indices
                    .iter()
                    .map(|&r| match dataset.rows[r][ci] {
                        Cell::Num(v) => v,
                        Cell::Cat(_) => unreachable!("kind checked at load"),
                    })
                    .collect();
                let mean = if values.is_empty() {
                    0.0
                } else {
                    values.iter().sum::<f64>() / values.len() as f64
                };
                let var = if values.is_empty() {
                    0.0
                } else {
                    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64
                };
                let std = var.sqrt();
                if std <= 1e-12 {
                    warnings.push(format!(
                        "numeric column \"{}\" is constant on the train split; encoded as zeros",
                        col.name
                    ));
                }
                numeric_encoders.push(NumericEncoder {
                    column: col.name.clone(),
                    mean,
                    std: if std <= 1e-12 { 0.0 } else { std },
                });
                feature_names.push(col.name.clone());
                plan.push(Plan::Numeric {
                    col: ci,
                    mean,
                    std: if std <= 1e-12 { 0.0 } else { std },
                });
            }
            ColumnKind::Categorical => {
                categorical_encoders.push(CategoricalEncoder {
                    column: col.name.clone(),
                    categories: col.categories.clone(),
                });
                for cat in &col.categories {
                    feature_names.push(format!("{}={}", col.name, cat));
                }
                plan.push(Plan::OneHot {
                    col: ci,
                    n_cats: col.categories.len(),
                });
            }
        }
    }

    let width: usize = plan
        .iter()
        .map(|p| match p {
            Plan::Numeric { .. } => 1,
            Plan::OneHot { n_cats, .. } => *n_cats,
        })
        .sum();

    let encode_rows = |indices: &[usize]| -> Matrix<S> {
        let mut m = Matrix::zeros(indices.len(), width);
        for (out_r, &r) in indices.iter().enumerate() {
            let row = m.row_mut(out_r);
            let mut c = 0;
            for p in &plan {
                match *p {
                    Plan::Numeric { col, mean, std } => {
                        let v = match dataset.rows[r][col] {
                            Cell::Num(v) => v,
                            Cell::Cat(_) => unreachable!(),
                        };
                        row[c] = if std == 0.0 {
                            S::zero()
                        } else {
                            sc((v - mean) / std)
                        };
                        c += 1;
                    }
                    Plan::OneHot { col, n_cats } => {
                        let idx = match dataset.rows[r][col] {
                            Cell::Cat(i) => i,
                            Cell::Num(_) => unreachable!(),
                        };
                        row[c + idx] = S::one();
                        c += n_cats;
                    }
                }
            }
        }
        m
    };

    Ok(EncodedSplit {
        x_train: encode_rows(train_indices),
        x_test: encode_rows(test_indices),
        y_train: train_indices.iter().map(|&i| dataset.labels[i]).collect(),
        y_test: test_indices.iter().map(|&i| dataset.labels[i]).collect(),
        group_test: test_indices.iter().map(|&i| dataset.groups[i]).collect(),
        feature_names,
        encoder: EncoderState {
            numeric: numeric_encoders,
            categorical: categorical_encoders,
        },
        warnings,
    })
}
