use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

fn parse_label(cell: &str, row: usize) -> Result<usize> {
    let value: f64 =
        cell.parse().map_err(|_| Error::Parse { row, message: format!("label {cell:?} is not a number") })?;
    if value < 0.0 {
        return Err(Error::Parse { row, message: format!("label {cell} is negative") });
    }
    if value.fract() != 0.0 || !value.is_finite() || value > u32::MAX as f64 {
        return Err(Error::Parse { row, message: format!("label {cell} is not an integer") });
    }
    Ok(value as usize)
}

/// Reads a headerless numeric CSV table. `label_column` (zero-based) holds
/// integer class labels; every other column becomes a feature. The class
/// count is `max label + 1`. Rows are numbered from 1 in errors.
pub fn load_csv(path: impl AsRef<Path>, label_column: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_path(path).map_err(
            |e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Format { path: path.to_path_buf(), message: format!("{other:?}") },
            },
        )?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse { row, message: format!("expected {w} columns, found {}", record.len()) })
            }
            _ => {}
        }
        if label_column >= record.len() {
            return Err(Error::Parse {
                row,
                message: format!("label column {label_column} is missing ({} columns)", record.len()),
            });
        }
        let mut feats = Vec::with_capacity(record.len() - 1);
        for (col, cell) in record.iter().enumerate() {
            if col == label_column {
                labels.push(parse_label(cell, row)?);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse { row, message: format!("column {col}: {cell:?} is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, message: format!("column {col}: non-finite value {cell}") });
            }
            feats.push(v);
        }
        features.push(feats);
    }
    if features.is_empty() {
        return Err(Error::Format { path: path.to_path_buf(), message: "no data rows".into() });
    }
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let name = path.file_stem().map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned());
    let data = Dataset::new(features, labels, class_count, name)
        .map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
    let unseen = data.unseen_classes();
    if !unseen.is_empty() {
        log::warn!(
            "{}: classes {unseen:?} have no examples (class count {} taken from the largest label)",
            path.display(),
            class_count
        );
    }
    Ok(data)
}
