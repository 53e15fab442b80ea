//! CSV ingestion (RFC 4180, UTF-8, header row required).

use std::path::Path;

use crate::error::{Error, Result};

use super::{Cell, ColumnKind, DatasetSchema, LoadReport, TabularDataset};

/// Load and parse a CSV file against a schema.
///
/// Every schema column must appear in the header (extra file columns are
/// ignored). Rows with an empty cell in any schema column are rejected and
/// counted; a non-empty cell that cannot be parsed with its declared kind is
/// a hard error naming the 1-based data row and column.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<TabularDataset> {
    schema.validate()?;
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Schema(format!("cannot open {}: {}", path.display(), e)))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {}", e)))?
        .clone();
    let positions: Vec<usize> = schema
        .columns
        .iter()
        .map(|col| {
            headers
                .iter()
                .position(|h| h == col.name)
                .ok_or_else(|| Error::Schema(format!("column \"{}\" missing from header", col.name)))
        })
        .collect::<Result<_>>()?;

    let label_idx = schema.column_index(&schema.label_column).unwrap();
    let sensitive_idx = schema.column_index(&schema.sensitive_column).unwrap();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut rejected = 0usize;
    let mut warnings = Vec::new();

    for (row_no, record) in reader.records().enumerate() {
        let row_no = row_no + 1; // 1-based data rows, header excluded
        let record = record.map_err(|e| Error::Parse {
            row: row_no,
            column: "<record>".into(),
            message: e.to_string(),
        })?;

        let mut cells = Vec::with_capacity(schema.columns.len());
        let mut missing: Option<String> = None;
        for (col, &pos) in schema.columns.iter().zip(&positions) {
            let raw = record.get(pos).unwrap_or("").trim();
            if raw.is_empty() || raw == "?" {
                missing = Some(col.name.clone());
                break;
            }
            let cell = match col.kind {
                ColumnKind::Numeric => {
                    let v: f64 = raw.parse().map_err(|_| Error::Parse {
                        row: row_no,
                        column: col.name.clone(),
                        message: format!("\"{}\" is not numeric", raw),
                    })?;
                    Cell::Num(v)
                }
                ColumnKind::Categorical => {
                    let idx = col
                        .categories
                        .iter()
                        .position(|c| c == raw)
                        .ok_or_else(|| Error::Parse {
                            row: row_no,
                            column: col.name.clone(),
                            message: format!("unknown category \"{}\"", raw),
                        })?;
                    Cell::Cat(idx)
                }
            };
            cells.push(cell);
        }
        if let Some(col) = missing {
            rejected += 1;
            if rejected <= 5 {
                warnings.push(format!("row {} rejected: missing \"{}\"", row_no, col));
            }
            continue;
        }

        let label_cat = match cells[label_idx] {
            Cell::Cat(i) => &schema.columns[label_idx].categories[i],
            Cell::Num(_) => unreachable!("label column is categorical by schema validation"),
        };
        labels.push(usize::from(label_cat == &schema.positive_label));
        let sensitive_cat = match cells[sensitive_idx] {
            Cell::Cat(i) => &schema.columns[sensitive_idx].categories[i],
            Cell::Num(_) => unreachable!("sensitive column is categorical by schema validation"),
        };
        groups.push(sensitive_cat == &schema.privileged_value);
        rows.push(cells);
    }

    if !rows.is_empty() {
        let observed: std::collections::HashSet<usize> = rows
            .iter()
            .map(|r| match r[sensitive_idx] {
                Cell::Cat(i) => i,
                Cell::Num(_) => unreachable!(),
            })
            .collect();
        if observed.len() < 2 {
            return Err(Error::Grouping(format!(
                "sensitive column \"{}\" has a single observed value",
                schema.sensitive_column
            )));
        }
    }

    Ok(TabularDataset {
        schema: schema.clone(),
        load_report: LoadReport {
            rows_loaded: rows.len(),
            rows_rejected: rejected,
            warnings,
        },
        rows,
        labels,
        groups,
    })
}

/// Render a dataset back to CSV text (used for fixtures and the CLI).
pub fn to_csv(dataset: &TabularDataset) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = dataset
        .schema
        .columns
        .iter()
        .map(|c| c.name.as_str())
        .collect();
    writer.write_record(&header).expect("csv header");
    for row in &dataset.rows {
        let record: Vec<String> = row
            .iter()
            .zip(&dataset.schema.columns)
            .map(|(cell, col)| match cell {
                Cell::Num(v) => format!("{}", v),
                Cell::Cat(i) => col.categories[*i].clone(),
            })
            .collect();
        writer.write_record(&record).expect("csv record");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("utf8")
}
