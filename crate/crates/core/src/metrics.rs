//! Overlap and distance metrics between masks.
//!
//! All overlap metrics are computed from exact integer pixel counts and
//! divided once, so results do not depend on evaluation order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{AcceptableRegion, AnnotationSet, Mask};

/// Metric identifiers used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Dice,
    Iou,
    Hausdorff,
    ExtendedDice,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Dice => "dice",
            MetricKind::Iou => "iou",
            MetricKind::Hausdorff => "hausdorff",
            MetricKind::ExtendedDice => "extended_dice",
        }
    }

    /// Overlap metrics live in `[0, 1]`; Hausdorff is a pixel distance.
    pub fn is_overlap(self) -> bool {
        !matches!(self, MetricKind::Hausdorff)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub value: f64,
}

impl MetricValue {
    pub fn new(kind: MetricKind, value: f64) -> Self {
        debug_assert!(
            !kind.is_overlap() || (0.0..=1.0).contains(&value),
            "{kind} = {value} outside [0, 1]"
        );
        debug_assert!(value >= 0.0);
        MetricValue { kind, value }
    }
}

/// Which pixels enter the Hausdorff distance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HausdorffMode {
    /// Every foreground pixel.
    #[default]
    Region,
    /// Foreground pixels with a 4-neighbour that is background or off-grid.
    Boundary,
}

impl std::str::FromStr for HausdorffMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "region" => Ok(HausdorffMode::Region),
            "boundary" => Ok(HausdorffMode::Boundary),
            other => Err(format!(
                "unknown hausdorff mode '{other}', expected 'region' or 'boundary'"
            )),
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    num as f64 / den as f64
}

/// `2|P∩G| / (|P|+|G|)`; 1 when both masks are empty.
pub fn dice(prediction: &Mask, reference: &Mask) -> Result<f64> {
    let both = prediction.overlap(reference)?;
    let total = prediction.count() + reference.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(ratio(2 * both, total))
}

/// `|P∩G| / |P∪G|`; 1 when both masks are empty.
pub fn iou(prediction: &Mask, reference: &Mask) -> Result<f64> {
    let both = prediction.overlap(reference)?;
    let union = prediction.count() + reference.count() - both;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(ratio(both, union))
}

/// Pixel counts entering the extended Dice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtendedCounts {
    /// |P|
    pub prediction: usize,
    /// |I|
    pub inner: usize,
    /// |P∩O|
    pub prediction_in_outer: usize,
    /// |P∩I|
    pub prediction_in_inner: usize,
}

impl ExtendedCounts {
    pub fn new(prediction: &Mask, region: &AcceptableRegion) -> Result<Self> {
        Ok(ExtendedCounts {
            prediction: prediction.count(),
            inner: region.inner().count(),
            prediction_in_outer: prediction.overlap(region.outer())?,
            prediction_in_inner: prediction.overlap(region.inner())?,
        })
    }

    /// `(|P∩O| + |P∩I|) / (|P| + |I|)`
    pub fn overlap_form(&self) -> f64 {
        let den = self.prediction + self.inner;
        if den == 0 {
            return 1.0;
        }
        ratio(self.prediction_in_outer + self.prediction_in_inner, den)
    }

    /// `1 − [(|P| − |P∩O|) + (|I| − |P∩I|)] / (|P| + |I|)`
    pub fn penalty_form(&self) -> f64 {
        let den = self.prediction + self.inner;
        if den == 0 {
            return 1.0;
        }
        let outside_outer = self.prediction - self.prediction_in_outer;
        let missed_inner = self.inner - self.prediction_in_inner;
        1.0 - ratio(outside_outer + missed_inner, den)
    }
}

/// Extended Dice of a prediction against an acceptable region.
///
/// Prediction pixels anywhere inside the outer region are not penalised;
/// missing inner pixels and pixels beyond the outer region are. Reduces to
/// [`dice`] when inner and outer coincide, and is 1 when `|P| + |I| = 0`.
pub fn extended_dice(prediction: &Mask, region: &AcceptableRegion) -> Result<f64> {
    Ok(ExtendedCounts::new(prediction, region)?.overlap_form())
}

/// Symmetric Hausdorff distance in pixels over full foreground sets.
pub fn hausdorff(prediction: &Mask, reference: &Mask) -> Result<f64> {
    hausdorff_with(prediction, reference, HausdorffMode::Region)
}

pub fn hausdorff_with(prediction: &Mask, reference: &Mask, mode: HausdorffMode) -> Result<f64> {
    prediction.check_dims(reference)?;
    if !prediction.has_foreground() || !reference.has_foreground() {
        return Err(Error::UndefinedMetric(
            "hausdorff distance needs two nonempty masks".into(),
        ));
    }
    let (a, b) = match mode {
        HausdorffMode::Region => (prediction.clone(), reference.clone()),
        HausdorffMode::Boundary => (boundary(prediction), boundary(reference)),
    };
    let forward = directed_sq(&a, &b);
    let backward = directed_sq(&b, &a);
    Ok((forward.max(backward) as f64).sqrt())
}

/// Largest squared distance from a pixel of `from` to the nearest pixel of `to`.
fn directed_sq(from: &Mask, to: &Mask) -> u64 {
    let field = squared_distance_field(to);
    from.bits()
        .iter()
        .zip(&field)
        .filter(|(&b, _)| b)
        .map(|(_, &d)| d.expect("target mask is nonempty"))
        .max()
        .unwrap_or(0)
}

/// Exact squared Euclidean distance from every pixel to the nearest
/// foreground pixel of `mask` (`None` when the mask is empty).
///
/// Separable two-pass transform: vertical distances per column, then the
/// lower envelope of parabolas along each row.
pub fn squared_distance_field(mask: &Mask) -> Vec<Option<u64>> {
    let (width, height) = mask.dims();
    let bits = mask.bits();

    let mut vertical: Vec<Option<u64>> = vec![None; width * height];
    for col in 0..width {
        let mut last: Option<usize> = None;
        for row in 0..height {
            if bits[row * width + col] {
                last = Some(row);
            }
            vertical[row * width + col] = last.map(|r| (row - r) as u64);
        }
        let mut next: Option<usize> = None;
        for row in (0..height).rev() {
            if bits[row * width + col] {
                next = Some(row);
            }
            if let Some(r) = next {
                let down = (r - row) as u64;
                let cell = &mut vertical[row * width + col];
                *cell = Some(cell.map_or(down, |up| up.min(down)));
            }
        }
    }

    let mut out = vec![None; width * height];
    let mut sites: Vec<usize> = Vec::with_capacity(width);
    let mut bounds: Vec<f64> = Vec::with_capacity(width + 1);
    for row in 0..height {
        let line = &vertical[row * width..(row + 1) * width];
        let f = |q: usize| {
            let g = line[q].expect("site has a vertical distance");
            g * g
        };
        sites.clear();
        bounds.clear();
        for q in (0..width).filter(|&q| line[q].is_some()) {
            let fq = f(q) as f64 + (q * q) as f64;
            loop {
                let Some(&v) = sites.last() else {
                    sites.push(q);
                    bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let fv = f(v) as f64 + (v * v) as f64;
                let s = (fq - fv) / (2.0 * (q as f64 - v as f64));
                if s <= *bounds.last().unwrap() {
                    sites.pop();
                    bounds.pop();
                } else {
                    sites.push(q);
                    bounds.push(s);
                    break;
                }
            }
        }
        if sites.is_empty() {
            continue;
        }
        let mut k = 0;
        for col in 0..width {
            while k + 1 < sites.len() && bounds[k + 1] < col as f64 {
                k += 1;
            }
            let q = sites[k];
            let dq = col.abs_diff(q) as u64;
            out[row * width + col] = Some(dq * dq + f(q));
        }
    }
    out
}

/// Foreground pixels touching background or the grid edge (4-connectivity).
pub fn boundary(mask: &Mask) -> Mask {
    let (width, height) = mask.dims();
    let mut out = Mask::empty(width, height);
    for (row, col) in mask.foreground() {
        let interior = row > 0
            && col > 0
            && row + 1 < height
            && col + 1 < width
            && mask.get(row - 1, col)
            && mask.get(row + 1, col)
            && mask.get(row, col - 1)
            && mask.get(row, col + 1);
        if !interior {
            out.set(row, col, true);
        }
    }
    out
}

/// Pairwise Dice between every pair of annotators of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub annotators: Vec<String>,
    /// `None` where either annotation is empty.
    pub values: Vec<Vec<Option<f64>>>,
}

impl PairwiseMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.values.len();
        (0..n).all(|i| (0..n).all(|j| self.values[i][j] == self.values[j][i]))
    }

    /// Elementwise mean over images; cells use only the images where they are
    /// defined.
    pub fn mean(matrices: &[PairwiseMatrix]) -> Result<PairwiseMatrix> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Structure("no pairwise matrices to average".into()))?;
        for m in matrices {
            if m.annotators != first.annotators {
                return Err(Error::Structure(format!(
                    "inconsistent annotator sets: {:?} vs {:?}",
                    first.annotators, m.annotators
                )));
            }
        }
        let n = first.annotators.len();
        let mut values = vec![vec![None; n]; n];
        for (i, row) in values.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let present: Vec<f64> = matrices.iter().filter_map(|m| m.values[i][j]).collect();
                if !present.is_empty() {
                    *cell = Some(present.iter().sum::<f64>() / present.len() as f64);
                }
            }
        }
        Ok(PairwiseMatrix {
            annotators: first.annotators.clone(),
            values,
        })
    }
}

pub fn pairwise_dice_matrix(annotations: &AnnotationSet) -> PairwiseMatrix {
    let masks = annotations.masks();
    let n = masks.len();
    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = if masks[i].has_foreground() && masks[j].has_foreground() {
                Some(dice(&masks[i], &masks[j]).expect("annotation set shares dimensions"))
            } else {
                None
            };
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    PairwiseMatrix {
        annotators: annotations.annotators().to_vec(),
        values,
    }
}

/// Mean, population standard deviation and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl fmt::Display for AggregateStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}({:.3})", self.mean, self.std)
    }
}

/// Summarises values as mean and population standard deviation (divisor = count).
pub fn aggregate(values: &[f64]) -> Result<AggregateStat> {
    if values.is_empty() {
        return Err(Error::Degenerate("cannot aggregate an empty list".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite value {v} in aggregate")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(AggregateStat {
        mean,
        std: var.sqrt(),
        count: values.len(),
    })
}
