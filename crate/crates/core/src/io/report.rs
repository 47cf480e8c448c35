//! Evaluation reports: per-image rows as CSV, aggregates and provenance as JSON.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::roc;
use crate::metrics::{aggregate, AggregateStat, HausdorffMode};

/// Where a report came from. Contains no timestamps so reruns are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub manifest_sha256: String,
    pub hausdorff_mode: HausdorffMode,
    pub binarize_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRow {
    pub image_id: String,
    pub subject_id: Option<String>,
    pub frame_index: Option<i64>,
    pub grade: Option<u8>,
    /// Aligned with [`EvaluationReport::columns`]; `None` is a missing value.
    pub values: Vec<Option<f64>>,
    /// Set when the image could not be evaluated; `values` are then all `None`.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub columns: Vec<String>,
    pub rows: Vec<ImageRow>,
    /// Column → statistics over the rows where the column has a value.
    pub aggregates: IndexMap<String, Option<AggregateStat>>,
    /// Column → AUC against grade classes, for columns with a value in every
    /// graded row when every row is graded and both classes occur.
    pub auc: IndexMap<String, f64>,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    provenance: &'a Provenance,
    images: usize,
    failed: Vec<FailedRow<'a>>,
    aggregates: &'a IndexMap<String, Option<AggregateStat>>,
    auc: &'a IndexMap<String, f64>,
}

#[derive(Serialize)]
struct FailedRow<'a> {
    image_id: &'a str,
    error: &'a str,
}

const FIXED_COLUMNS: [&str; 4] = ["image_id", "subject_id", "frame_index", "grade"];

impl EvaluationReport {
    /// Builds a report, deriving aggregates and AUCs from `rows`.
    pub fn from_rows(columns: Vec<String>, rows: Vec<ImageRow>, provenance: Provenance) -> Self {
        let aggregates = aggregate_columns(&columns, &rows);
        let auc = auc_columns(&columns, &rows);
        EvaluationReport {
            columns,
            rows,
            aggregates,
            auc,
            provenance,
        }
    }

    pub fn failed_rows(&self) -> impl Iterator<Item = &ImageRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = FIXED_COLUMNS
            .iter()
            .copied()
            .chain(self.columns.iter().map(String::as_str))
            .chain(std::iter::once("error"));
        w.write_record(header).map_err(csv_error)?;
        for row in &self.rows {
            let mut record = vec![
                row.image_id.clone(),
                row.subject_id.clone().unwrap_or_default(),
                row.frame_index.map(|v| v.to_string()).unwrap_or_default(),
                row.grade.map(|v| v.to_string()).unwrap_or_default(),
            ];
            record.extend(
                row.values
                    .iter()
                    .map(|v| v.map(|v| format!("{v:?}")).unwrap_or_default()),
            );
            record.push(row.error.clone().unwrap_or_default());
            w.write_record(&record).map_err(csv_error)?;
        }
        w.into_inner()
            .map_err(|e| Error::Structure(format!("csv writer: {e}")))
    }

    pub fn to_json(&self) -> String {
        let doc = ReportJson {
            provenance: &self.provenance,
            images: self.rows.len(),
            failed: self
                .failed_rows()
                .map(|r| FailedRow {
                    image_id: &r.image_id,
                    error: r.error.as_deref().unwrap_or_default(),
                })
                .collect(),
            aggregates: &self.aggregates,
            auc: &self.auc,
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        text
    }

    /// Writes `per_image.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("per_image.csv");
        fs::write(&csv_path, self.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join("report.json");
        fs::write(&json_path, self.to_json()).map_err(|e| Error::io(&json_path, e))
    }

    /// Reads the per-image rows of a `per_image.csv` back, returning the
    /// metric column names and rows.
    pub fn read_rows_csv(path: &Path) -> Result<(Vec<String>, Vec<ImageRow>)> {
        let bad = |m: String| Error::decode(path, m);
        let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
        let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let n = headers.len();
        if n < FIXED_COLUMNS.len() + 1 || headers.get(n - 1) != Some("error") {
            return Err(bad("not a per-image report".into()));
        }
        let columns: Vec<String> = headers
            .iter()
            .skip(FIXED_COLUMNS.len())
            .take(n - FIXED_COLUMNS.len() - 1)
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let opt = |i: usize| record.get(i).filter(|s| !s.is_empty());
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("bad value '{s}'")))
            };
            rows.push(ImageRow {
                image_id: record.get(0).unwrap_or_default().to_string(),
                subject_id: opt(1).map(str::to_string),
                frame_index: opt(2)
                    .map(|s| s.parse().map_err(|_| bad(format!("bad frame_index '{s}'"))))
                    .transpose()?,
                grade: opt(3)
                    .map(|s| s.parse().map_err(|_| bad(format!("bad grade '{s}'"))))
                    .transpose()?,
                values: (0..columns.len())
                    .map(|k| opt(FIXED_COLUMNS.len() + k).map(parse).transpose())
                    .collect::<Result<_>>()?,
                error: opt(n - 1).map(str::to_string),
            });
        }
        Ok((columns, rows))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Structure(format!("csv writer: {e}"))
}

/// Statistics per column over present values, in row order.
pub fn aggregate_columns(
    columns: &[String],
    rows: &[ImageRow],
) -> IndexMap<String, Option<AggregateStat>> {
    columns
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values: Vec<f64> = rows.iter().filter_map(|r| r.values[k]).collect();
            (name.clone(), aggregate(&values).ok())
        })
        .collect()
}

fn auc_columns(columns: &[String], rows: &[ImageRow]) -> IndexMap<String, f64> {
    let ok: Vec<&ImageRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    if ok.is_empty() || ok.iter().any(|r| r.grade.is_none()) {
        return IndexMap::new();
    }
    columns
        .iter()
        .enumerate()
        .filter_map(|(k, name)| {
            let samples: Option<Vec<(f64, bool)>> = ok
                .iter()
                .map(|r| r.values[k].map(|v| (v, r.grade == Some(4))))
                .collect();
            let auc = roc(&samples?).ok()?.auc;
            Some((name.clone(), auc))
        })
        .collect()
}
