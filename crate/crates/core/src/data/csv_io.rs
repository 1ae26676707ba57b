use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use ndarray::Array2;

use super::{CategoricalColumn, Dataset};
use crate::error::{DriftlabError, Result};

enum ColumnKind {
    Numeric,
    Categorical,
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a comma-separated file with a mandatory header row.
///
/// Label values are mapped to class indices in order of first appearance.
/// A feature column whose cells all fail to parse as numbers is kept as a
/// categorical column; a column mixing numbers and text is rejected.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DriftlabError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DriftlabError::MissingLabelColumn(label_column.to_owned()))?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(DriftlabError::RaggedRow {
                row: i + 1,
                expected: header.len(),
                found: record.len(),
            });
        }
        rows.push(record);
    }
    if rows.is_empty() {
        return Err(DriftlabError::EmptyDataset);
    }

    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(DriftlabError::InvalidArgument(
            "no feature columns besides the label".into(),
        ));
    }

    let mut kinds = Vec::with_capacity(feature_cols.len());
    for &c in &feature_cols {
        let numeric = rows.iter().filter(|r| parse_finite(&r[c]).is_some()).count();
        if numeric == rows.len() {
            kinds.push(ColumnKind::Numeric);
        } else if numeric == 0 {
            kinds.push(ColumnKind::Categorical);
        } else {
            let (row, rec) = rows
                .iter()
                .enumerate()
                .find(|(_, r)| parse_finite(&r[c]).is_none())
                .expect("mixed column has a non-numeric cell");
            return Err(DriftlabError::NonNumericCell {
                row: row + 1,
                column: header[c].clone(),
                value: rec[c].to_owned(),
            });
        }
    }

    let numeric_cols: Vec<usize> = feature_cols
        .iter()
        .zip(&kinds)
        .filter(|(_, k)| matches!(k, ColumnKind::Numeric))
        .map(|(&c, _)| c)
        .collect();

    let n = rows.len();
    let mut features = Array2::zeros((n, numeric_cols.len()));
    for (i, rec) in rows.iter().enumerate() {
        for (j, &c) in numeric_cols.iter().enumerate() {
            features[[i, j]] = parse_finite(&rec[c]).expect("checked numeric");
        }
    }

    let categorical = feature_cols
        .iter()
        .zip(&kinds)
        .filter(|(_, k)| matches!(k, ColumnKind::Categorical))
        .map(|(&c, _)| CategoricalColumn {
            name: header[c].clone(),
            values: rows.iter().map(|r| r[c].to_owned()).collect(),
        })
        .collect();

    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let labels = rows
        .iter()
        .map(|r| {
            let raw = &r[label_idx];
            *class_index.entry(raw.to_owned()).or_insert_with(|| {
                class_names.push(raw.to_owned());
                class_names.len() - 1
            })
        })
        .collect();

    let ds = Dataset {
        features,
        labels,
        k: class_names.len(),
        feature_names: numeric_cols.iter().map(|&c| header[c].clone()).collect(),
        categorical,
        class_names,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes numeric features plus an integer `label` column.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_rows(ds, path.as_ref(), None)
}

/// Like [`write_csv`], with an extra `drifted` 0/1 column for auditing injected drift.
pub fn write_csv_with_marker(ds: &Dataset, drifted: &[bool], path: impl AsRef<Path>) -> Result<()> {
    if drifted.len() != ds.n() {
        return Err(DriftlabError::DimensionMismatch {
            expected: ds.n(),
            found: drifted.len(),
        });
    }
    write_rows(ds, path.as_ref(), Some(drifted))
}

fn write_rows(ds: &Dataset, path: &Path, drifted: Option<&[bool]>) -> Result<()> {
    if !ds.categorical.is_empty() {
        return Err(DriftlabError::InvalidArgument(
            "encode categorical columns before exporting".into(),
        ));
    }
    let file = File::create(path).map_err(|e| DriftlabError::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push("label");
    if drifted.is_some() {
        header.push("drifted");
    }
    writer.write_record(&header)?;
    for (i, row) in ds.features.rows().into_iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(ds.labels[i].to_string());
        if let Some(marks) = drifted {
            fields.push(u8::from(marks[i]).to_string());
        }
        writer.write_record(&fields)?;
    }
    writer.flush().map_err(|e| DriftlabError::io(path, e))?;
    Ok(())
}
