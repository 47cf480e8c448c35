//! Dataset manifests.
//!
//! A manifest lists one entry per image. The delimited form is a UTF-8 CSV
//! with a header row:
//!
//! | column            | required | meaning                                   |
//! |-------------------|----------|-------------------------------------------|
//! | `image_id`        | yes      | unique identifier                         |
//! | `image_path`      | yes      | grayscale frame raster                    |
//! | `subject_id`      | no       | groups frames of one sequence             |
//! | `frame_index`     | no       | integer position within the sequence      |
//! | `prediction_path` | no       | predicted mask raster or soft `.grid`     |
//! | `grade`           | no       | quality grade 1..=4                       |
//! | `mask:<id>`       | ≥ 1      | mask raster drawn by annotator `<id>`     |
//!
//! Empty cells mean "absent". The JSON form is
//! `{"entries": [{"image_id", "image_path", "annotator_masks": {id: path}, ...}]}`
//! with the same optional fields. Paths are relative to the manifest's
//! directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::grade_to_class;

pub const MASK_COLUMN_PREFIX: &str = "mask:";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub subject_id: Option<String>,
    pub frame_index: Option<i64>,
    pub image_path: PathBuf,
    pub prediction_path: Option<PathBuf>,
    pub grade: Option<u8>,
    /// Annotator id → mask path, in manifest order.
    pub annotator_masks: Vec<(String, PathBuf)>,
}

impl ManifestEntry {
    pub fn annotators(&self) -> impl Iterator<Item = &str> {
        self.annotator_masks.iter().map(|(a, _)| a.as_str())
    }

    pub fn mask_path(&self, annotator: &str) -> Option<&Path> {
        self.annotator_masks
            .iter()
            .find(|(a, _)| a == annotator)
            .map(|(_, p)| p.as_path())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub path: PathBuf,
    /// Hex SHA-256 of the manifest file bytes.
    pub sha256: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonManifest {
    entries: Vec<JsonEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEntry {
    image_id: String,
    image_path: PathBuf,
    #[serde(default)]
    subject_id: Option<String>,
    #[serde(default)]
    frame_index: Option<i64>,
    #[serde(default)]
    prediction_path: Option<PathBuf>,
    #[serde(default)]
    grade: Option<i64>,
    annotator_masks: IndexMap<String, PathBuf>,
}

impl DatasetManifest {
    /// Loads a `.json` manifest or, for any other extension, a CSV manifest,
    /// and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let entries = if is_json {
            parse_json(&bytes, path, base)?
        } else {
            parse_csv(&bytes, path, base)?
        };
        let manifest = DatasetManifest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            entries,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        manifest_error(&self.path, message)
    }

    fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(self.error("no entries"));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.image_id.as_str()) {
                return Err(self.error(format!("duplicate image_id '{}'", e.image_id)));
            }
            if e.annotator_masks.is_empty() {
                return Err(self.error(format!("entry '{}' has no annotator masks", e.image_id)));
            }
            let paths = std::iter::once(&e.image_path)
                .chain(e.prediction_path.iter())
                .chain(e.annotator_masks.iter().map(|(_, p)| p));
            for p in paths {
                if !p.is_file() {
                    return Err(self.error(format!(
                        "entry '{}' references missing file {}",
                        e.image_id,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Annotator ids across all entries, in order of first appearance.
    pub fn annotators(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            for a in e.annotators() {
                if !out.iter().any(|x| x == a) {
                    out.push(a.to_string());
                }
            }
        }
        out
    }
}

fn manifest_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn check_grade(path: &Path, id: &str, grade: Option<i64>) -> Result<Option<u8>> {
    grade
        .map(|g| {
            grade_to_class(g)
                .map(|_| g as u8)
                .map_err(|e| manifest_error(path, format!("entry '{id}': {e}")))
        })
        .transpose()
}

fn parse_json(bytes: &[u8], path: &Path, base: &Path) -> Result<Vec<ManifestEntry>> {
    let raw: JsonManifest =
        serde_json::from_slice(bytes).map_err(|e| manifest_error(path, e.to_string()))?;
    raw.entries
        .into_iter()
        .map(|e| {
            Ok(ManifestEntry {
                grade: check_grade(path, &e.image_id, e.grade)?,
                image_path: base.join(e.image_path),
                prediction_path: e.prediction_path.map(|p| base.join(p)),
                annotator_masks: e
                    .annotator_masks
                    .into_iter()
                    .map(|(a, p)| (a, base.join(p)))
                    .collect(),
                image_id: e.image_id,
                subject_id: e.subject_id,
                frame_index: e.frame_index,
            })
        })
        .collect()
}

fn parse_csv(bytes: &[u8], path: &Path, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| manifest_error(path, e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        column(name).ok_or_else(|| manifest_error(path, format!("missing column '{name}'")))
    };
    let id_col = required("image_id")?;
    let image_col = required("image_path")?;
    let subject_col = column("subject_id");
    let frame_col = column("frame_index");
    let pred_col = column("prediction_path");
    let grade_col = column("grade");
    let mask_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix(MASK_COLUMN_PREFIX)
                .map(|a| (i, a.to_string()))
        })
        .collect();
    if mask_cols.is_empty() {
        return Err(manifest_error(
            path,
            format!("no '{MASK_COLUMN_PREFIX}<annotator>' columns"),
        ));
    }
    let mut ids = HashSet::new();
    for (_, a) in &mask_cols {
        if a.is_empty() || !ids.insert(a.as_str()) {
            return Err(manifest_error(path, format!("bad annotator column '{a}'")));
        }
    }
    let known = [
        "image_id",
        "image_path",
        "subject_id",
        "frame_index",
        "prediction_path",
        "grade",
    ];
    if let Some(h) = headers
        .iter()
        .find(|h| !known.contains(h) && !h.starts_with(MASK_COLUMN_PREFIX))
    {
        return Err(manifest_error(path, format!("unknown column '{h}'")));
    }

    let mut entries = Vec::new();
    for (row, record) in reader.records().enumerate() {
        // header is line 1
        let line = row + 2;
        let record = record.map_err(|e| manifest_error(path, format!("line {line}: {e}")))?;
        let cell = |i: Option<usize>| i.and_then(|i| record.get(i)).filter(|s| !s.is_empty());
        let bad = |what: &str, v: &str| {
            manifest_error(path, format!("line {line}: invalid {what} '{v}'"))
        };

        let image_id = cell(Some(id_col))
            .ok_or_else(|| manifest_error(path, format!("line {line}: empty image_id")))?
            .to_string();
        let image_path = cell(Some(image_col))
            .ok_or_else(|| manifest_error(path, format!("line {line}: empty image_path")))?;
        let frame_index = cell(frame_col)
            .map(|v| v.parse::<i64>().map_err(|_| bad("frame_index", v)))
            .transpose()?;
        let grade = cell(grade_col)
            .map(|v| v.parse::<i64>().map_err(|_| bad("grade", v)))
            .transpose()?;
        entries.push(ManifestEntry {
            grade: check_grade(path, &image_id, grade)?,
            image_path: base.join(image_path),
            subject_id: cell(subject_col).map(str::to_string),
            frame_index,
            prediction_path: cell(pred_col).map(|p| base.join(p)),
            annotator_masks: mask_cols
                .iter()
                .filter_map(|(i, a)| cell(Some(*i)).map(|p| (a.clone(), base.join(p))))
                .collect(),
            image_id,
        });
    }
    Ok(entries)
}
