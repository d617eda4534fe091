use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::prototypes::{project_to_boundary, PrototypeSet};

/// Scientific notation with 17 significant digits; parses back to the same
/// `f64` bit pattern.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `label,c_1,…,c_d` rows, one per class, without a header.
pub fn write_prototypes(path: impl AsRef<Path>, protos: &PrototypeSet) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in protos.iter() {
        out.push_str(&p.label.to_string());
        for &c in p.point.coords() {
            out.push(',');
            out.push_str(&format_f64(c));
        }
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a prototype CSV and projects every row onto the unit sphere. Rows
/// that are already unit-norm are kept bit-for-bit.
pub fn read_prototypes(path: impl AsRef<Path>) -> Result<PrototypeSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let label_cell = cells.next().unwrap_or_default();
        let label: usize = label_cell.parse().map_err(|_| Error::Parse {
            row,
            message: format!("label {label_cell:?} is not a non-negative integer"),
        })?;
        let coords = cells
            .map(|c| {
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { row, message: format!("coordinate {c:?} is not a finite number") })
            })
            .collect::<Result<Vec<f64>>>()?;
        if coords.is_empty() {
            return Err(Error::Parse { row, message: "row has no coordinates".into() });
        }
        rows.push(coords);
        labels.push(label);
    }
    project_to_boundary(&rows, &labels).map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })
}
