//! Batch orchestration over a dataset manifest.
//!
//! Entries are processed independently (in parallel when `jobs > 1`) and
//! results are always assembled in manifest order, so output does not depend
//! on the degree of parallelism.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::{roc, RocCurve};
use crate::io::grid::{load_grid, save_grid};
use crate::io::manifest::{DatasetManifest, ManifestEntry};
use crate::io::raster::{load_frame, load_gray, load_mask, save_mask};
use crate::io::report::{EvaluationReport, ImageRow, Provenance};
use crate::loss::{
    extended_dice_loss, finite_difference_check, LossResult, SoftPrediction,
    DEFAULT_BINARIZE_THRESHOLD,
};
use crate::mask::{
    acceptable_region, check_dims, intersect_all, majority_vote, union_all, AcceptableRegion,
    AnnotationSet, Mask,
};
use crate::metrics::{
    dice, extended_dice, hausdorff_with, iou, pairwise_dice_matrix, HausdorffMode, PairwiseMatrix,
};
use crate::perfusion::{
    average_curves, curve_error, frame_intensity_with, IntensityCurve, IntensityStat,
};

pub const TOOL_NAME: &str = "xdice";
pub const MAJORITY: &str = "majority";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    /// Worker threads; 0 uses the rayon default, 1 runs serially.
    pub jobs: usize,
    pub hausdorff_mode: HausdorffMode,
    /// Soft `.grid` predictions are foreground strictly above this value.
    pub binarize_threshold: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            jobs: 0,
            hausdorff_mode: HausdorffMode::Region,
            binarize_threshold: DEFAULT_BINARIZE_THRESHOLD,
        }
    }
}

impl Options {
    fn map_entries<T, F>(&self, entries: &[ManifestEntry], f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&ManifestEntry) -> T + Sync + Send,
    {
        if self.jobs == 1 {
            return Ok(entries.iter().map(f).collect());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::Structure(format!("thread pool: {e}")))?;
        Ok(pool.install(|| entries.par_iter().map(f).collect()))
    }
}

/// Loads the annotator masks of one entry, checking them against the
/// frame's dimensions.
pub fn load_annotations(entry: &ManifestEntry) -> Result<AnnotationSet> {
    let frame = load_gray(&entry.image_path)?;
    let masks = entry
        .annotator_masks
        .iter()
        .map(|(a, p)| {
            let m = load_mask(p)?;
            check_dims((frame.width, frame.height), m.dims())?;
            Ok((a.clone(), m))
        })
        .collect::<Result<Vec<_>>>()?;
    AnnotationSet::new(masks)
}

fn is_grid(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("grid") || e.eq_ignore_ascii_case("txt"))
}

/// Loads a prediction raster, or binarizes a soft `.grid`/`.txt` prediction.
pub fn load_prediction(path: &Path, threshold: f64) -> Result<Mask> {
    if is_grid(path) {
        let g = load_grid(path)?;
        let soft = SoftPrediction::new(g.width, g.height, g.values)
            .map_err(|e| Error::decode(path, e.to_string()))?;
        Ok(soft.binarize(threshold))
    } else {
        load_mask(path)
    }
}

/// Metric column names for a set of annotators, in report order.
pub fn eval_columns(annotators: &[String]) -> Vec<String> {
    let mut cols = vec!["extended_dice".to_string()];
    for r in std::iter::once(MAJORITY).chain(annotators.iter().map(String::as_str)) {
        for m in ["dice", "iou", "hausdorff"] {
            cols.push(format!("{m}_{r}"));
        }
    }
    cols
}

fn compare(prediction: &Mask, reference: &Mask, mode: HausdorffMode) -> Result<[Option<f64>; 3]> {
    Ok([
        Some(dice(prediction, reference)?),
        Some(iou(prediction, reference)?),
        hausdorff_with(prediction, reference, mode).ok(),
    ])
}

fn evaluate_entry(
    entry: &ManifestEntry,
    annotators: &[String],
    options: &Options,
) -> Result<Vec<Option<f64>>> {
    let set = load_annotations(entry)?;
    let pred_path = entry.prediction_path.as_deref().ok_or_else(|| {
        Error::Structure(format!("entry '{}' has no prediction_path", entry.image_id))
    })?;
    let prediction = load_prediction(pred_path, options.binarize_threshold)?;
    check_dims(set.dims(), prediction.dims())?;

    let mode = options.hausdorff_mode;
    let mut values = vec![Some(extended_dice(&prediction, &acceptable_region(&set))?)];
    values.extend(compare(&prediction, &majority_vote(&set), mode)?);
    for a in annotators {
        match set.get(a) {
            Some(m) => values.extend(compare(&prediction, m, mode)?),
            None => values.extend([None; 3]),
        }
    }
    Ok(values)
}

/// Evaluates every prediction against each annotator, the majority vote and
/// the acceptable region. Failing entries become error rows.
pub fn run_eval(manifest: &DatasetManifest, options: &Options) -> Result<EvaluationReport> {
    if manifest.entries.is_empty() {
        return Err(Error::Structure("manifest has no entries".into()));
    }
    let annotators = manifest.annotators();
    let columns = eval_columns(&annotators);
    let rows = options.map_entries(&manifest.entries, |entry| {
        let result = evaluate_entry(entry, &annotators, options);
        let (values, error) = match result {
            Ok(v) => (v, None),
            Err(e) => (vec![None; columns.len()], Some(e.to_string())),
        };
        ImageRow {
            image_id: entry.image_id.clone(),
            subject_id: entry.subject_id.clone(),
            frame_index: entry.frame_index,
            grade: entry.grade,
            values,
            error,
        }
    })?;
    Ok(EvaluationReport::from_rows(
        columns,
        rows,
        Provenance {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            manifest_sha256: manifest.sha256.clone(),
            hausdorff_mode: options.hausdorff_mode,
            binarize_threshold: options.binarize_threshold,
        },
    ))
}

/// Pairwise annotator Dice per image, averaged over the manifest.
pub fn run_pairwise(manifest: &DatasetManifest, options: &Options) -> Result<PairwiseMatrix> {
    let first: Vec<&str> = manifest.entries[0].annotators().collect();
    for e in &manifest.entries {
        let ids: Vec<&str> = e.annotators().collect();
        if ids.len() < 2 {
            return Err(Error::Structure(format!(
                "entry '{}' has fewer than two annotators",
                e.image_id
            )));
        }
        if ids != first {
            return Err(Error::Structure(format!(
                "entry '{}' has annotators {ids:?}, expected {first:?}",
                e.image_id
            )));
        }
    }
    let matrices = options
        .map_entries(&manifest.entries, |e| {
            load_annotations(e).map(|s| pairwise_dice_matrix(&s))
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    PairwiseMatrix::mean(&matrices)
}

/// Matrix as CSV: header of annotator ids, one row per annotator, blank
/// cells where undefined.
pub fn pairwise_to_csv(matrix: &PairwiseMatrix) -> String {
    let mut out = String::from("annotator");
    for a in &matrix.annotators {
        out.push(',');
        out.push_str(a);
    }
    out.push('\n');
    for (a, row) in matrix.annotators.iter().zip(&matrix.values) {
        out.push_str(a);
        for v in row {
            out.push(',');
            if let Some(v) = v {
                out.push_str(&format!("{v:?}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Files written for one entry by [`run_regions`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFiles {
    pub image_id: String,
    pub inner: PathBuf,
    pub outer: PathBuf,
    pub majority: PathBuf,
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".xdice-write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Writes inner, outer and majority-vote masks for every entry as
/// `<id>_inner.<ext>` and so on. `extension` is `pgm` or `png`.
pub fn run_regions(
    manifest: &DatasetManifest,
    out_dir: &Path,
    extension: &str,
    options: &Options,
) -> Result<Vec<Result<RegionFiles>>> {
    ensure_writable(out_dir)?;
    options.map_entries(&manifest.entries, |e| {
        let set = load_annotations(e)?;
        let stem = file_stem(&e.image_id);
        let path = |kind: &str| out_dir.join(format!("{stem}_{kind}.{extension}"));
        let files = RegionFiles {
            image_id: e.image_id.clone(),
            inner: path("inner"),
            outer: path("outer"),
            majority: path(MAJORITY),
        };
        save_mask(&files.inner, &intersect_all(&set))?;
        save_mask(&files.outer, &union_all(&set))?;
        save_mask(&files.majority, &majority_vote(&set))?;
        Ok(files)
    })
}

/// Which mask turns a frame into a curve value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MaskSource {
    Annotator(String),
    Prediction,
    /// Majority vote of the entry's annotators.
    Consensus,
}

impl MaskSource {
    pub fn name(&self) -> String {
        match self {
            MaskSource::Annotator(a) => a.clone(),
            MaskSource::Prediction => "prediction".into(),
            MaskSource::Consensus => "consensus".into(),
        }
    }
}

impl std::str::FromStr for MaskSource {
    type Err = String;

    /// `prediction`, `consensus`, `annotator:<id>` or a bare annotator id.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "" => return Err("empty mask source".into()),
            "prediction" => MaskSource::Prediction,
            "consensus" => MaskSource::Consensus,
            other => MaskSource::Annotator(
                other
                    .strip_prefix("annotator:")
                    .unwrap_or(other)
                    .to_string(),
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceCurve {
    pub source: String,
    pub curve: IntensityCurve,
    /// Mean absolute difference to the reference; `None` when undefined.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectCurves {
    pub subject_id: String,
    /// Mean of the annotator curves.
    pub reference: IntensityCurve,
    pub sources: Vec<SourceCurve>,
}

/// Curve sources used when none are requested: every annotator, the
/// consensus, and the prediction when all entries carry one.
pub fn default_sources(manifest: &DatasetManifest) -> Vec<MaskSource> {
    let mut out: Vec<MaskSource> = manifest
        .annotators()
        .into_iter()
        .map(MaskSource::Annotator)
        .collect();
    out.push(MaskSource::Consensus);
    if manifest.entries.iter().all(|e| e.prediction_path.is_some()) {
        out.push(MaskSource::Prediction);
    }
    out
}

struct FrameValues {
    annotators: Vec<Option<f64>>,
    sources: Vec<Option<f64>>,
}

fn frame_values(
    entry: &ManifestEntry,
    annotators: &[String],
    sources: &[MaskSource],
    stat: IntensityStat,
    options: &Options,
) -> FrameValues {
    let blank = || FrameValues {
        annotators: vec![None; annotators.len()],
        sources: vec![None; sources.len()],
    };
    let Ok(frame) = load_frame(&entry.image_path) else {
        return blank();
    };
    let measure = |m: Option<Mask>| m.and_then(|m| frame_intensity_with(&frame, &m, stat).ok());
    let annotator_mask = |a: &str| entry.mask_path(a).and_then(|p| load_mask(p).ok());
    let consensus = || load_annotations(entry).ok().map(|set| majority_vote(&set));
    FrameValues {
        annotators: annotators
            .iter()
            .map(|a| measure(annotator_mask(a)))
            .collect(),
        sources: sources
            .iter()
            .map(|s| {
                measure(match s {
                    MaskSource::Annotator(a) => annotator_mask(a),
                    MaskSource::Prediction => entry
                        .prediction_path
                        .as_deref()
                        .and_then(|p| load_prediction(p, options.binarize_threshold).ok()),
                    MaskSource::Consensus => consensus(),
                })
            })
            .collect(),
    }
}

/// Per subject: one curve per source, the reference curve averaged over the
/// annotators, and each source's error against it. Frames that cannot be
/// measured are missing entries.
pub fn run_curves(
    manifest: &DatasetManifest,
    sources: &[MaskSource],
    stat: IntensityStat,
    options: &Options,
) -> Result<Vec<SubjectCurves>> {
    let annotators = manifest.annotators();
    for s in sources {
        if let MaskSource::Annotator(a) = s {
            if !annotators.contains(a) {
                return Err(Error::Structure(format!("unknown annotator '{a}'")));
            }
        }
    }
    let mut subjects: Vec<(String, Vec<&ManifestEntry>)> = Vec::new();
    for e in &manifest.entries {
        let (Some(subject), Some(_)) = (&e.subject_id, e.frame_index) else {
            return Err(Error::Structure(format!(
                "entry '{}' lacks subject_id or frame_index",
                e.image_id
            )));
        };
        match subjects.iter_mut().find(|(s, _)| s == subject) {
            Some((_, list)) => list.push(e),
            None => subjects.push((subject.clone(), vec![e])),
        }
    }

    let mut out = Vec::with_capacity(subjects.len());
    for (subject_id, mut entries) in subjects {
        entries.sort_by_key(|e| e.frame_index);
        let indices: Vec<i64> = entries.iter().filter_map(|e| e.frame_index).collect();
        let owned: Vec<ManifestEntry> = entries.into_iter().cloned().collect();
        let per_frame = options.map_entries(&owned, |e| {
            frame_values(e, &annotators, sources, stat, options)
        })?;

        let column = |pick: &dyn Fn(&FrameValues) -> Option<f64>| {
            IntensityCurve::new(indices.clone(), per_frame.iter().map(pick).collect())
                .map_err(|e| Error::Structure(format!("subject '{subject_id}': {e}")))
        };
        let annotator_curves = (0..annotators.len())
            .map(|k| column(&|f| f.annotators[k]))
            .collect::<Result<Vec<_>>>()?;
        let reference = average_curves(&annotator_curves)?;
        let sources = sources
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let curve = column(&|f| f.sources[k])?;
                Ok(SourceCurve {
                    source: s.name(),
                    error: curve_error(&curve, &reference).ok(),
                    curve,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(SubjectCurves {
            subject_id,
            reference,
            sources,
        });
    }
    Ok(out)
}

/// Writes `curves/<subject>/<source>.txt`, `curves/<subject>/reference.txt`
/// and a `curves.csv` summary of curve errors.
pub fn write_curves(out_dir: &Path, subjects: &[SubjectCurves]) -> Result<()> {
    let mut summary = String::from("subject_id,source,curve_error,points,missing\n");
    for s in subjects {
        let dir = out_dir.join("curves").join(file_stem(&s.subject_id));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let write = |name: &str, c: &IntensityCurve| {
            let p = dir.join(format!("{}.txt", file_stem(name)));
            fs::write(&p, c.to_text()).map_err(|e| Error::io(&p, e))
        };
        write("reference", &s.reference)?;
        for c in &s.sources {
            write(&c.source, &c.curve)?;
            summary.push_str(&format!(
                "{},{},{},{},{}\n",
                s.subject_id,
                c.source,
                c.error.map(|v| format!("{v:?}")).unwrap_or_default(),
                c.curve.len(),
                c.curve.missing()
            ));
        }
    }
    let p = out_dir.join("curves.csv");
    fs::write(&p, summary).map_err(|e| Error::io(&p, e))
}

/// ROC of one report column against the grades: grade 4 is the positive
/// class.
pub fn run_roc(
    manifest: &DatasetManifest,
    metrics: &[String],
    options: &Options,
) -> Result<Vec<(String, RocCurve)>> {
    if let Some(e) = manifest.entries.iter().find(|e| e.grade.is_none()) {
        return Err(Error::Structure(format!(
            "entry '{}' has no grade",
            e.image_id
        )));
    }
    let report = run_eval(manifest, options)?;
    if let Some(r) = report.failed_rows().next() {
        return Err(Error::Structure(format!(
            "entry '{}' could not be scored: {}",
            r.image_id,
            r.error.as_deref().unwrap_or_default()
        )));
    }
    metrics
        .iter()
        .map(|m| {
            let k = report.column(m).ok_or_else(|| {
                Error::Structure(format!(
                    "unknown metric '{m}'; available: {}",
                    report.columns.join(", ")
                ))
            })?;
            let samples = report
                .rows
                .iter()
                .map(|r| {
                    r.values[k].map(|v| (v, r.grade == Some(4))).ok_or_else(|| {
                        Error::UndefinedMetric(format!("{m} missing for '{}'", r.image_id))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((m.clone(), roc(&samples)?))
        })
        .collect()
}

fn load_region(inner: &Path, outer: &Path) -> Result<AcceptableRegion> {
    AcceptableRegion::new(load_mask(inner)?, load_mask(outer)?)
}

fn load_soft(path: &Path) -> Result<SoftPrediction> {
    let g = load_grid(path)?;
    SoftPrediction::new(g.width, g.height, g.values)
}

/// Loss and gradient for a soft prediction grid against inner/outer masks.
pub fn run_loss(prediction: &Path, inner: &Path, outer: &Path) -> Result<LossResult> {
    extended_dice_loss(&load_soft(prediction)?, &load_region(inner, outer)?)
}

pub fn write_gradient(path: &Path, result: &LossResult) -> Result<()> {
    save_grid(path, result.width, result.height, &result.gradient)
}

pub fn run_grad_check(prediction: &Path, inner: &Path, outer: &Path, step: f64) -> Result<f64> {
    finite_difference_check(&load_soft(prediction)?, &load_region(inner, outer)?, step)
}
