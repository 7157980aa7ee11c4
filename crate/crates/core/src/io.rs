//! CSV datasets, accuracy tables and the versioned model file.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classifiers::{GammaSelection, KnnModel, QdaModel, RqdaModel, SrqdaModel};
use crate::error::{Error, Result};
use crate::model::LabeledDataset;

pub const MODEL_FORMAT: &str = "srqda-model";
pub const MODEL_SCHEMA_VERSION: u32 = 1;
/// Parse errors listed before the message is truncated.
const MAX_REPORTED_ROWS: usize = 10;

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub data: LabeledDataset,
    pub feature_names: Vec<String>,
    /// Original label text of classes 0 and 1.
    pub class_names: [String; 2],
}

fn parse_failure(bad: &[String]) -> Error {
    let shown = bad.iter().take(MAX_REPORTED_ROWS).cloned().collect::<Vec<_>>().join("; ");
    let more = bad.len().saturating_sub(MAX_REPORTED_ROWS);
    let suffix = if more > 0 { format!(" (and {more} more)") } else { String::new() };
    Error::Parse(format!("{shown}{suffix}"))
}

fn reader_from<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Reads a labeled CSV. Rows whose label equals `positive_label` are
/// class 0 (positive discriminant) and all others class 1; without
/// `positive_label`, labels must be `0` or `1`.
pub fn read_labeled_csv<R: Read>(input: R, label_column: &str, positive_label: Option<&str>) -> Result<CsvDataset> {
    let mut rdr = reader_from(input);
    let headers = rdr.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Parse(format!("label column '{label_column}' not found in header")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let p = feature_names.len();
    if p == 0 {
        return Err(Error::Parse("no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut bad = Vec::new();
    let mut names: [Option<String>; 2] = [None, None];
    for (r, record) in rdr.records().enumerate() {
        // Data rows start on line 2.
        let line = r + 2;
        let record = match record {
            Ok(rec) => rec,
            Err(e) => {
                bad.push(format!("row {line}: {e}"));
                continue;
            }
        };
        if record.len() != headers.len() {
            bad.push(format!("row {line}: expected {} fields, found {}", headers.len(), record.len()));
            continue;
        }
        let text = &record[label_idx];
        let label = match positive_label {
            Some(pos) => usize::from(text != pos),
            None => match text {
                "0" => 0,
                "1" => 1,
                other => {
                    bad.push(format!("row {line}: label '{other}' is not 0 or 1"));
                    continue;
                }
            },
        };
        names[label].get_or_insert_with(|| text.to_string());
        let mut row = Vec::with_capacity(p);
        let mut ok = true;
        for (c, field) in record.iter().enumerate() {
            if c == label_idx {
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    bad.push(format!("row {line}, column '{}': '{field}' is not a finite number", &headers[c]));
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            values.extend(row);
            labels.push(label);
        }
    }
    if !bad.is_empty() {
        return Err(parse_failure(&bad));
    }
    let n = labels.len();
    let data = LabeledDataset::new(DMatrix::from_row_slice(n, p, &values), labels)?;
    let class_names = match positive_label {
        Some(pos) => [pos.to_string(), names[1].clone().unwrap_or_else(|| "other".into())],
        None => ["0".into(), "1".into()],
    };
    Ok(CsvDataset {
        data,
        feature_names,
        class_names,
    })
}

/// Reads unlabeled feature rows; a column named `ignore` (e.g. a label)
/// is skipped when present. An input with only a header yields zero rows.
pub fn read_feature_csv<R: Read>(input: R, ignore: Option<&str>) -> Result<(DMatrix<f64>, Vec<String>)> {
    let mut rdr = reader_from(input);
    let headers = rdr.headers()?.clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| Some(&headers[i]) != ignore).collect();
    let names: Vec<String> = keep.iter().map(|&i| headers[i].to_string()).collect();
    let mut values = Vec::new();
    let mut bad = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record = match record {
            Ok(rec) => rec,
            Err(e) => {
                bad.push(format!("row {line}: {e}"));
                continue;
            }
        };
        let mut row = Vec::with_capacity(keep.len());
        for &c in &keep {
            match record.get(c).map(str::parse::<f64>) {
                Some(Ok(v)) if v.is_finite() => row.push(v),
                _ => {
                    bad.push(format!("row {line}, column '{}': not a finite number", &headers[c]));
                    break;
                }
            }
        }
        if row.len() == keep.len() {
            values.extend(row);
            n += 1;
        }
    }
    if !bad.is_empty() {
        return Err(parse_failure(&bad));
    }
    Ok((DMatrix::from_row_slice(n, keep.len(), &values), names))
}

/// Writes a labeled dataset with columns `x0..x{p-1}` and `label`.
pub fn write_labeled_csv<W: Write>(out: W, data: &LabeledDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.n_features()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.n_samples() {
        let mut rec: Vec<String> = data.features().row(i).iter().map(|v| format!("{v}")).collect();
        rec.push(data.labels()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A fitted classifier of any supported kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum FittedModel {
    Qda(QdaModel),
    Rqda {
        model: RqdaModel,
        selection: Option<GammaSelection>,
    },
    Srqda(Box<SrqdaModel>),
    Knn(KnnModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub schema_version: u32,
    pub tool_version: String,
    pub feature_names: Vec<String>,
    pub class_names: [String; 2],
    pub model: FittedModel,
}

impl ModelFile {
    pub fn new(model: FittedModel, feature_names: Vec<String>, class_names: [String; 2]) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            schema_version: MODEL_SCHEMA_VERSION,
            tool_version: tool_version().into(),
            feature_names,
            class_names,
            model,
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_reader(input).map_err(|e| Error::Parse(format!("model file is not valid JSON: {e}")))?;
        let format = value.get("format").and_then(|v| v.as_str());
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if format != Some(MODEL_FORMAT) || version != Some(MODEL_SCHEMA_VERSION as u64) {
            return Err(Error::Parse(format!(
                "unsupported model schema (format {format:?}, version {version:?}; expected {MODEL_FORMAT} v{MODEL_SCHEMA_VERSION})"
            )));
        }
        serde_json::from_value(value).map_err(|e| Error::Parse(format!("model file does not match schema v{MODEL_SCHEMA_VERSION}: {e}")))
    }
}
