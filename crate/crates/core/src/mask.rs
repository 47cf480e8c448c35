//! Binary masks, annotation sets and the regions derived from them.
//!
//! A [`Mask`] is a dense row-major grid of foreground flags. An
//! [`AnnotationSet`] bundles one mask per annotator for the same image, and
//! the constructions here reduce it to an inner region (pixels every
//! annotator marked), an outer region (pixels any annotator marked) and a
//! strict-majority consensus.

use crate::error::{Error, Result};

/// Binary foreground/background pixel grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    /// All-background mask.
    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    /// All-foreground mask.
    pub fn full(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    /// Builds a mask from row-major flags.
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Structure(format!(
                "mask of {width}x{height} needs {} pixels, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    /// Builds a mask from `(row, col)` foreground coordinates.
    pub fn from_coords<I>(width: usize, height: usize, coords: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut mask = Mask::empty(width, height);
        for (row, col) in coords {
            if row >= height || col >= width {
                return Err(Error::Structure(format!(
                    "pixel ({row}, {col}) outside {width}x{height} mask"
                )));
            }
            mask.bits[row * width + col] = true;
        }
        Ok(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Row-major foreground flags.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Out-of-range coordinates are background.
    pub fn get(&self, row: usize, col: usize) -> bool {
        row < self.height && col < self.width && self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        assert!(
            row < self.height && col < self.width,
            "pixel ({row}, {col}) outside {}x{} mask",
            self.width,
            self.height
        );
        self.bits[row * self.width + col] = value;
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn has_foreground(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }

    /// Foreground `(row, col)` coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / width, i % width))
    }

    /// Errors unless `other` has the same dimensions.
    pub fn check_dims(&self, other: &Mask) -> Result<()> {
        check_dims(self.dims(), other.dims())
    }

    /// Number of pixels foreground in both masks.
    pub fn overlap(&self, other: &Mask) -> Result<usize> {
        self.check_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    pub fn intersection(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a || b)
    }

    /// Pixels in `self` but not in `other`.
    pub fn difference(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &Mask) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b))
    }

    /// Copies the `width`x`height` window whose top-left pixel is `(row, col)`.
    pub fn window(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Mask> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::Structure(format!(
                "window {width}x{height} at ({row}, {col}) exceeds {}x{} mask",
                self.width, self.height
            )));
        }
        let mut bits = Vec::with_capacity(width * height);
        for r in row..row + height {
            let start = r * self.width + col;
            bits.extend_from_slice(&self.bits[start..start + width]);
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Result<Mask> {
        self.check_dims(other)?;
        Ok(Mask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            expected_width: expected.0,
            expected_height: expected.1,
            width: actual.0,
            height: actual.1,
        });
    }
    Ok(())
}

/// One mask per annotator for a single image.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    annotators: Vec<String>,
    masks: Vec<Mask>,
}

impl AnnotationSet {
    /// Validates that the set is nonempty, ids are unique and all masks share
    /// dimensions.
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, Mask)>) -> Result<Self> {
        let mut annotators: Vec<String> = Vec::new();
        let mut masks: Vec<Mask> = Vec::new();
        for (id, mask) in entries {
            let id = id.into();
            if annotators.contains(&id) {
                return Err(Error::DuplicateAnnotator(id));
            }
            if let Some(first) = masks.first() {
                first.check_dims(&mask)?;
            }
            annotators.push(id);
            masks.push(mask);
        }
        if masks.is_empty() {
            return Err(Error::EmptyAnnotationSet);
        }
        Ok(AnnotationSet { annotators, masks })
    }

    /// Convenience constructor naming annotators `a0`, `a1`, ...
    pub fn from_masks(masks: Vec<Mask>) -> Result<Self> {
        AnnotationSet::new(
            masks
                .into_iter()
                .enumerate()
                .map(|(i, m)| (format!("a{i}"), m)),
        )
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.masks[0].dims()
    }

    pub fn get(&self, annotator: &str) -> Option<&Mask> {
        self.annotators
            .iter()
            .position(|a| a == annotator)
            .map(|i| &self.masks[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mask)> {
        self.annotators
            .iter()
            .map(String::as_str)
            .zip(self.masks.iter())
    }

    /// Per-pixel count of annotators marking foreground.
    pub fn vote_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.masks[0].len()];
        for mask in &self.masks {
            for (c, &b) in counts.iter_mut().zip(mask.bits()) {
                *c += usize::from(b);
            }
        }
        counts
    }

    fn threshold(&self, keep: impl Fn(usize) -> bool) -> Mask {
        let (width, height) = self.dims();
        Mask {
            width,
            height,
            bits: self.vote_counts().into_iter().map(keep).collect(),
        }
    }
}

/// Inner and outer regions bounding the acceptable predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptableRegion {
    inner: Mask,
    outer: Mask,
}

impl AcceptableRegion {
    /// Errors unless `inner` is contained in `outer`.
    pub fn new(inner: Mask, outer: Mask) -> Result<Self> {
        if !inner.is_subset_of(&outer)? {
            return Err(Error::Structure(
                "inner region is not contained in outer region".into(),
            ));
        }
        Ok(AcceptableRegion { inner, outer })
    }

    /// Region for a single known ground truth, where inner and outer coincide.
    pub fn exact(mask: Mask) -> Self {
        AcceptableRegion {
            inner: mask.clone(),
            outer: mask,
        }
    }

    pub fn inner(&self) -> &Mask {
        &self.inner
    }

    pub fn outer(&self) -> &Mask {
        &self.outer
    }

    pub fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }

    /// Pixels between the two boundaries: `outer \ inner`.
    pub fn band(&self) -> Mask {
        self.outer
            .difference(&self.inner)
            .expect("region masks share dimensions")
    }
}

/// Pixels every annotator marks as foreground.
pub fn intersect_all(annotations: &AnnotationSet) -> Mask {
    let n = annotations.len();
    annotations.threshold(|c| c == n)
}

/// Pixels at least one annotator marks as foreground.
pub fn union_all(annotations: &AnnotationSet) -> Mask {
    annotations.threshold(|c| c > 0)
}

pub fn acceptable_region(annotations: &AnnotationSet) -> AcceptableRegion {
    AcceptableRegion {
        inner: intersect_all(annotations),
        outer: union_all(annotations),
    }
}

/// Strict-majority consensus: foreground iff more than half the annotators
/// mark the pixel. Ties with an even annotator count go to background.
pub fn majority_vote(annotations: &AnnotationSet) -> Mask {
    let n = annotations.len();
    annotations.threshold(|c| 2 * c > n)
}
