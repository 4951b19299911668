//! CSV ingestion and JSON/CSV report files.

use std::fs;
use std::path::Path;

use pear_core::data::Dataset;
use pear_core::Tensor;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{PearError, Result};

/// Reports at most this many offending rows per problem.
const MAX_REPORTED_ROWS: usize = 20;

fn row_list(rows: &[usize]) -> String {
    let shown: Vec<String> = rows
        .iter()
        .take(MAX_REPORTED_ROWS)
        .map(|r| r.to_string())
        .collect();
    let more = rows.len().saturating_sub(MAX_REPORTED_ROWS);
    if more > 0 {
        format!("{} (and {more} more)", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

/// Reads a numeric CSV with a header row. Every column except
/// `label_column` becomes a feature; labels must be 0 or 1.
///
/// Row numbers in errors are file line numbers, so the header is line 1.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| PearError::io(path, e))?;
    parse_csv(&text, label_column, path)
}

pub fn parse_csv(text: &str, label_column: &str, path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| PearError::csv(path, e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(PearError::csv(path, "missing header row"));
    }
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| PearError::csv(path, format!("no label column {label_column:?} in header")))?;
    let width = header.len();
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    if names.is_empty() {
        return Err(PearError::csv(path, "no feature columns"));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let (mut ragged, mut unparsable, mut non_binary) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| PearError::csv(path, format!("line {line}: {e}")))?;
        if record.len() != width {
            ragged.push(line);
            continue;
        }
        let mut row = Vec::with_capacity(width - 1);
        let mut label = None;
        let mut bad = false;
        for (j, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    if j == label_idx {
                        label = Some(v);
                    } else {
                        row.push(v);
                    }
                }
                _ => bad = true,
            }
        }
        if bad {
            unparsable.push(line);
            continue;
        }
        match label {
            Some(l) if l == 0.0 || l == 1.0 => labels.push(l as usize),
            _ => {
                non_binary.push(line);
                continue;
            }
        }
        features.extend(row);
    }

    let mut problems = Vec::new();
    if !ragged.is_empty() {
        problems.push(format!("ragged rows at lines {}", row_list(&ragged)));
    }
    if !unparsable.is_empty() {
        problems.push(format!("unparsable cells at lines {}", row_list(&unparsable)));
    }
    if !non_binary.is_empty() {
        problems.push(format!("non-binary labels at lines {}", row_list(&non_binary)));
    }
    if !problems.is_empty() {
        return Err(PearError::csv(path, problems.join("; ")));
    }
    if labels.is_empty() {
        return Err(PearError::csv(path, "no data rows"));
    }
    let x = Tensor::new(labels.len(), names.len(), features)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut ds = Dataset::new(name, x, labels, names)?;
    ds.provenance_mut().source = path.display().to_string();
    Ok(ds)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| PearError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PearError::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| PearError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PearError::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            create_dir(parent)?;
        }
    }
    fs::write(path, text).map_err(|e| PearError::io(path, e))
}

/// Writes serializable rows as CSV with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| PearError::csv(path, e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| PearError::csv(path, e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}
