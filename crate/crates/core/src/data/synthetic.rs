//! Synthetic tabular fixtures with a controllable group base-rate gap.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

use super::{Cell, ColumnKind, ColumnSchema, DatasetSchema, LoadReport, TabularDataset};

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    pub n_numeric: usize,
    pub n_categorical: usize,
    /// Target `P(y=1 | privileged) - P(y=1 | unprivileged)`.
    pub bias_strength: f64,
    pub seed: u64,
}

/// Generate a binary-label dataset whose features carry the label signal and
/// whose sensitive attribute shifts the label base rate by `bias_strength`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TabularDataset> {
    if spec.n_rows < 10 {
        return Err(Error::Config(format!(
            "synthetic datasets need at least 10 rows, requested {}",
            spec.n_rows
        )));
    }
    if spec.bias_strength.abs() > 1.0 {
        return Err(Error::Config("bias_strength must lie in [-1, 1]".into()));
    }
    if spec.n_numeric == 0 && spec.n_categorical == 0 {
        return Err(Error::Config("need at least one feature column".into()));
    }

    let p_priv = (0.5 + spec.bias_strength / 2.0).clamp(0.0, 1.0);
    let p_unpriv = (0.5 - spec.bias_strength / 2.0).clamp(0.0, 1.0);

    let mut columns = Vec::new();
    for j in 0..spec.n_numeric {
        columns.push(ColumnSchema {
            name: format!("num_{}", j),
            kind: ColumnKind::Numeric,
            categories: vec![],
        });
    }
    for j in 0..spec.n_categorical {
        columns.push(ColumnSchema {
            name: format!("cat_{}", j),
            kind: ColumnKind::Categorical,
            categories: vec!["low".into(), "mid".into(), "high".into()],
        });
    }
    columns.push(ColumnSchema {
        name: "group".into(),
        kind: ColumnKind::Categorical,
        categories: vec!["priv".into(), "unpriv".into()],
    });
    columns.push(ColumnSchema {
        name: "outcome".into(),
        kind: ColumnKind::Categorical,
        categories: vec!["neg".into(), "pos".into()],
    });
    let schema = DatasetSchema {
        name: format!("synthetic-{}", spec.seed),
        columns,
        label_column: "outcome".into(),
        positive_label: "pos".into(),
        sensitive_column: "group".into(),
        privileged_value: "priv".into(),
    };

    let mut r = rng::stream(spec.seed, &["synthetic"]);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let mut rows = Vec::with_capacity(spec.n_rows);
    let mut labels = Vec::with_capacity(spec.n_rows);
    let mut groups = Vec::with_capacity(spec.n_rows);
    for _ in 0..spec.n_rows {
        let privileged = r.random_range(0.0..1.0) < 0.5;
        let p_pos = if privileged { p_priv } else { p_unpriv };
        let y = usize::from(r.random_range(0.0..1.0) < p_pos);
        let signal = if y == 1 { 1.0 } else { -1.0 };

        let mut cells = Vec::with_capacity(schema.columns.len());
        for j in 0..spec.n_numeric {
            // feature strength varies per column so the task is not trivially flat
            let strength = 0.6 + 0.3 * (j % 3) as f64;
            cells.push(Cell::Num(signal * strength + noise.sample(&mut r)));
        }
        for _ in 0..spec.n_categorical {
            let u: f64 = r.random_range(0.0..1.0);
            // y = 1 skews toward "high", y = 0 toward "low"
            let cat = if y == 1 {
                if u < 0.15 {
                    0
                } else if u < 0.45 {
                    1
                } else {
                    2
                }
            } else if u < 0.55 {
                0
            } else if u < 0.85 {
                1
            } else {
                2
            };
            cells.push(Cell::Cat(cat));
        }
        cells.push(Cell::Cat(usize::from(!privileged)));
        cells.push(Cell::Cat(y));
        rows.push(cells);
        labels.push(y);
        groups.push(privileged);
    }

    Ok(TabularDataset {
        schema,
        rows,
        labels,
        groups,
        load_report: LoadReport {
            rows_loaded: spec.n_rows,
            rows_rejected: 0,
            warnings: vec![],
        },
    })
}
