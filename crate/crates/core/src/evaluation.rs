//! ROC analysis of metric scores against human quality grades.
//!
//! Grade 4 means the segmentation needs no manual correction and forms the
//! positive class; grades 1 to 3 form the negative class.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Human grade of a segmentation with its metric scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedImage {
    pub image_id: String,
    pub grade: u8,
    pub scores: BTreeMap<String, f64>,
}

impl GradedImage {
    pub fn new(
        image_id: impl Into<String>,
        grade: u8,
        scores: BTreeMap<String, f64>,
    ) -> Result<Self> {
        grade_to_class(i64::from(grade))?;
        if let Some((k, v)) = scores.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!("score {k} = {v} is not finite")));
        }
        Ok(GradedImage {
            image_id: image_id.into(),
            grade,
            scores,
        })
    }

    /// `true` for the no-correction-needed class.
    pub fn is_positive(&self) -> bool {
        self.grade == 4
    }
}

/// Maps a grade to its binary class: 4 → 1, 1..=3 → 0.
pub fn grade_to_class(grade: i64) -> Result<u8> {
    match grade {
        4 => Ok(1),
        1..=3 => Ok(0),
        other => Err(Error::Domain(format!("grade {other} outside 1..=4"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false_positive_rate, true_positive_rate)` from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    /// Two columns, `fpr tpr`, one row per point.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (fpr, tpr) in &self.points {
            writeln!(out, "{fpr} {tpr}").expect("writing to a String");
        }
        out
    }
}

/// ROC curve from `(score, is_positive)` pairs, higher scores predicting the
/// positive class.
///
/// The threshold sweeps every distinct score from +∞ down to −∞. Tied scores
/// move in one step, producing a diagonal segment, so the trapezoidal area
/// counts each tied positive/negative pair as one half.
pub fn roc(samples: &[(f64, bool)]) -> Result<RocCurve> {
    if let Some((s, _)) = samples.iter().find(|(s, _)| !s.is_finite()) {
        return Err(Error::Domain(format!("score {s} is not finite")));
    }
    let positives = samples.iter().filter(|(_, c)| *c).count() as u64;
    let negatives = samples.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs at least one sample of each class".into(),
        ));
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut counts: Vec<(u64, u64)> = vec![(0, 0)];
    let (mut fp, mut tp) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        counts.push((fp, tp));
    }

    // twice the area in units of one (negative, positive) pair
    let doubled: u64 = counts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    let auc = doubled as f64 / (2 * positives * negatives) as f64;

    let points = counts
        .iter()
        .map(|&(fp, tp)| (fp as f64 / negatives as f64, tp as f64 / positives as f64))
        .collect();
    Ok(RocCurve { points, auc })
}

/// ROC curve of one score column against the grade classes.
pub fn metric_roc(images: &[GradedImage], metric: &str) -> Result<RocCurve> {
    let samples = images
        .iter()
        .map(|img| {
            img.scores
                .get(metric)
                .map(|&s| (s, img.is_positive()))
                .ok_or_else(|| {
                    Error::Structure(format!(
                        "image {} has no score for metric '{metric}'",
                        img.image_id
                    ))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    roc(&samples)
}

/// ROC curves for two score columns over the same graded images.
pub fn compare_metrics_auc(
    images: &[GradedImage],
    metric_a: &str,
    metric_b: &str,
) -> Result<(RocCurve, RocCurve)> {
    Ok((metric_roc(images, metric_a)?, metric_roc(images, metric_b)?))
}
