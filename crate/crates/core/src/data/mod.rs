//! Dataset ingestion, encoding, sensitive-attribute designation, splitting,
//! and synthetic fixture generation.

mod encode;
mod load;
mod split;
mod synthetic;

pub use encode::{encode_and_standardize, EncodeOptions, EncodedSplit, EncoderState};
pub use load::{load_csv, to_csv};
pub use split::split;
pub use synthetic::{generate_synthetic, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Declared category order; required for categorical columns and fixes
    /// the one-hot layout.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

/// Schema descriptor for one tabular dataset (shipped as a JSON file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
    pub label_column: String,
    /// Label category mapped to class 1; everything else maps to class 0.
    pub positive_label: String,
    pub sensitive_column: String,
    /// Sensitive category treated as the privileged group.
    pub privileged_value: String,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("schema declares no columns".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column \"{}\"", col.name)));
            }
            match col.kind {
                ColumnKind::Categorical if col.categories.is_empty() => {
                    return Err(Error::Schema(format!(
                        "categorical column \"{}\" declares no categories",
                        col.name
                    )));
                }
                ColumnKind::Numeric if !col.categories.is_empty() => {
                    return Err(Error::Schema(format!(
                        "numeric column \"{}\" must not declare categories",
                        col.name
                    )));
                }
                _ => {}
            }
        }
        let label = self.column(&self.label_column).ok_or_else(|| {
            Error::Schema(format!("label column \"{}\" not declared", self.label_column))
        })?;
        if !label.categories.iter().any(|c| c == &self.positive_label) {
            return Err(Error::Schema(format!(
                "positive_label \"{}\" not among the label categories",
                self.positive_label
            )));
        }
        let sensitive = self.column(&self.sensitive_column).ok_or_else(|| {
            Error::Schema(format!(
                "sensitive column \"{}\" not declared",
                self.sensitive_column
            ))
        })?;
        if !sensitive
            .categories
            .iter()
            .any(|c| c == &self.privileged_value)
        {
            return Err(Error::Schema(format!(
                "privileged_value \"{}\" not among the sensitive categories",
                self.privileged_value
            )));
        }
        if self.label_column == self.sensitive_column {
            return Err(Error::Schema(
                "label and sensitive columns must differ".into(),
            ));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// One parsed cell; categorical values index the declared category list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_loaded: usize,
    pub rows_rejected: usize,
    pub warnings: Vec<String>,
}

/// Parsed dataset with the label and sensitive columns pre-mapped.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub schema: DatasetSchema,
    /// Cells aligned with `schema.columns`.
    pub rows: Vec<Vec<Cell>>,
    /// Binary label per row (1 = positive_label).
    pub labels: Vec<usize>,
    /// Group membership per row (true = privileged).
    pub groups: Vec<bool>,
    pub load_report: LoadReport,
}

impl TabularDataset {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}
