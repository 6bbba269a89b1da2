use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{detect_kinds, Dataset};
use crate::edm::FamilySpec;
use crate::error::{Error, Result};
use crate::soft::MixtureParams;

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Column holding ground-truth labels; excluded from the values.
    pub label_col: Option<String>,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            row: 0,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

/// Reads a headed, comma-separated numeric file. Rows are numbered from 1
/// after the header in errors. Non-negative integer labels are kept; any other
/// labels are mapped to ids in order of first appearance.
pub fn read_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = match &options.label_col {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 0,
            column: name.clone(),
            message: "label column not found in header".into(),
        })?),
        None => None,
    };
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut flat = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: r + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if Some(c) == label_idx {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: header[c].clone(),
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    column: header[c].clone(),
                    message: format!("{cell:?} is not finite"),
                });
            }
            flat.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            row: 0,
            column: String::new(),
            message: "no data rows".into(),
        });
    }
    let values = Array2::from_shape_vec((rows, names.len()), flat).expect("row lengths checked");
    let kinds = detect_kinds(&values);
    Ok(Dataset {
        values,
        kinds,
        labels: label_idx.map(|_| label_ids(&raw_labels)),
        names: Some(names),
    })
}

fn label_ids(raw: &[String]) -> Vec<usize> {
    let numeric: Option<Vec<usize>> = raw.iter().map(|s| s.parse().ok()).collect();
    numeric.unwrap_or_else(|| {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        raw.iter()
            .map(|s| {
                let next = ids.len();
                *ids.entry(s.as_str()).or_insert(next)
            })
            .collect()
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes values (and a trailing `label` column when present).
pub fn write_csv(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let names: Vec<String> = match &dataset.names {
        Some(n) => n.clone(),
        None => (0..dataset.n_cols()).map(|j| format!("x{j}")).collect(),
    };
    let mut header = names.join(",");
    if dataset.labels.is_some() {
        header.push_str(",label");
    }
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for (i, row) in dataset.values.outer_iter().enumerate() {
        let mut line = row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",");
        if let Some(l) = &dataset.labels {
            line.push_str(&format!(",{}", l[i]));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Columns `row_index, cluster` and, for soft fits, `r_0 … r_{K−1}`.
pub fn write_assignments(path: impl AsRef<Path>, assign: &[usize], resp: Option<ArrayView2<f64>>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = create(path)?;
    let mut header = String::from("row_index,cluster");
    if let Some(r) = &resp {
        for h in 0..r.ncols() {
            header.push_str(&format!(",r_{h}"));
        }
    }
    writeln!(w, "{header}").map_err(io)?;
    for (i, a) in assign.iter().enumerate() {
        let mut line = format!("{i},{a}");
        if let Some(r) = &resp {
            for v in r.row(i) {
                line.push_str(&format!(",{v}"));
            }
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads the `cluster` column of an assignments file, or the column named
/// `column` of any labelled CSV.
pub fn read_assignments(path: impl AsRef<Path>, column: &str) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let idx = header.iter().position(|h| h.trim() == column).ok_or_else(|| Error::Parse {
        row: 0,
        column: column.to_string(),
        message: "column not found in header".into(),
    })?;
    let mut raw = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let cell = record.get(idx).unwrap_or("").trim().to_string();
        if cell.is_empty() {
            return Err(Error::Parse {
                row: r + 1,
                column: column.to_string(),
                message: "empty label".into(),
            });
        }
        raw.push(cell);
    }
    Ok(label_ids(&raw))
}

/// Serialized model; field order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub families: Vec<FamilySpec>,
    pub alpha: Vec<f64>,
    pub kappa: Vec<f64>,
    pub pi: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub quasi_loglik: Option<f64>,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl ModelFile {
    pub fn new(params: &MixtureParams, quasi_loglik: Option<f64>, config: serde_json::Value, seed: u64) -> ModelFile {
        ModelFile {
            families: params.families.clone(),
            alpha: params.alpha.clone(),
            kappa: params.kappa.clone(),
            pi: params.pi.clone(),
            mu: params.mu.outer_iter().map(|r| r.to_vec()).collect(),
            quasi_loglik: quasi_loglik.filter(|v| v.is_finite()),
            config,
            seed,
        }
    }

    pub fn params(&self) -> Result<MixtureParams> {
        let k = self.mu.len();
        let j = self.families.len();
        if self.mu.iter().any(|r| r.len() != j) {
            return Err(Error::InvalidConfig("model mean rows must have one entry per attribute".into()));
        }
        let flat: Vec<f64> = self.mu.iter().flatten().copied().collect();
        let params = MixtureParams {
            pi: self.pi.clone(),
            mu: Array2::from_shape_vec((k, j), flat).expect("shape checked"),
            kappa: self.kappa.clone(),
            alpha: self.alpha.clone(),
            families: self.families.clone(),
        };
        params.validate()?;
        Ok(params)
    }
}

pub fn write_model(path: impl AsRef<Path>, model: &ModelFile) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(model).map_err(|e| Error::InvalidConfig(format!("model encoding: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        row: e.line(),
        column: String::new(),
        message: e.to_string(),
    })
}
