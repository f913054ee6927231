//! File formats: JSON documents, search-space descriptions and CSV datasets.

use std::fs;
use std::path::Path;

use gaea_core::supernet::{Dataset, SearchSpace};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{HarnessError, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::json(path, e))
}

/// Pretty-printed, newline-terminated; creates parent directories.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// `{"nodes": 3, "edges": [[1, 0], [2, 0], [2, 1]], "ops": ["identity", "dense"], "dim": 2}`
pub fn read_space(path: &Path) -> Result<SearchSpace> {
    read_json(path)
}

/// Columns `x0..x{d-1}` then `y0..y{d-1}`, one sample per row.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let csv_err = |source| HarnessError::Csv { path: path.into(), source };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    let d = data.dim();
    let header: Vec<String> = (0..d).map(|i| format!("x{i}")).chain((0..d).map(|i| format!("y{i}"))).collect();
    writer.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let row: Vec<String> = data.input(i).iter().chain(data.target(i)).map(|v| format!("{v:?}")).collect();
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let csv_err = |source| HarnessError::Csv { path: path.into(), source };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let cols = header.len();
    if cols == 0 || cols % 2 != 0 {
        return Err(HarnessError::Data(format!("{}: expected equal numbers of x and y columns", path.display())));
    }
    let d = cols / 2;
    for (i, name) in header.iter().enumerate() {
        let want = if i < d { format!("x{i}") } else { format!("y{}", i - d) };
        if name.trim() != want {
            return Err(HarnessError::Data(format!("{}: column {i} is '{name}', expected '{want}'", path.display())));
        }
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                HarnessError::Data(format!("{}: row {}: '{field}' is not a number", path.display(), line + 1))
            })?;
            if i < d {
                inputs.push(v);
            } else {
                targets.push(v);
            }
        }
    }
    Ok(Dataset::new(d, inputs, targets)?)
}
