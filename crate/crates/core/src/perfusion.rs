//! Frame-intensity curves from grayscale sequences and segmentation masks.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{check_dims, Mask};

/// Grayscale frame on the 0–255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl IntensityFrame {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Structure("frame has zero size".into()));
        }
        if values.len() != width * height {
            return Err(Error::Structure(format!(
                "frame of {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::Domain(format!("intensity {v} outside [0, 255]")));
        }
        Ok(IntensityFrame {
            width,
            height,
            values,
        })
    }

    pub fn from_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        IntensityFrame::new(
            width,
            height,
            pixels.iter().map(|&p| f64::from(p)).collect(),
        )
    }

    /// Uniform frame.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        IntensityFrame::new(width, height, vec![value; width * height])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// How the masked intensities of one frame collapse to a scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityStat {
    #[default]
    Mean,
    Sum,
    Median,
}

impl std::str::FromStr for IntensityStat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mean" => Ok(IntensityStat::Mean),
            "sum" => Ok(IntensityStat::Sum),
            "median" => Ok(IntensityStat::Median),
            other => Err(format!(
                "unknown intensity statistic '{other}', expected mean, sum or median"
            )),
        }
    }
}

/// Mean intensity over the mask's foreground.
pub fn frame_intensity(frame: &IntensityFrame, mask: &Mask) -> Result<f64> {
    frame_intensity_with(frame, mask, IntensityStat::Mean)
}

pub fn frame_intensity_with(
    frame: &IntensityFrame,
    mask: &Mask,
    stat: IntensityStat,
) -> Result<f64> {
    check_dims(frame.dims(), mask.dims())?;
    let mut picked: Vec<f64> = frame
        .values
        .iter()
        .zip(mask.bits())
        .filter(|(_, &b)| b)
        .map(|(&v, _)| v)
        .collect();
    if picked.is_empty() {
        return Err(Error::UndefinedMetric(
            "frame intensity over an empty mask".into(),
        ));
    }
    let sum: f64 = picked.iter().sum();
    Ok(match stat {
        IntensityStat::Sum => sum,
        IntensityStat::Mean => sum / picked.len() as f64,
        IntensityStat::Median => {
            picked.sort_by(f64::total_cmp);
            let mid = picked.len() / 2;
            if picked.len() % 2 == 1 {
                picked[mid]
            } else {
                (picked[mid - 1] + picked[mid]) / 2.0
            }
        }
    })
}

/// One scalar per frame; `None` marks frames whose value could not be
/// computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityCurve {
    frame_indices: Vec<i64>,
    values: Vec<Option<f64>>,
}

impl IntensityCurve {
    pub fn new(frame_indices: Vec<i64>, values: Vec<Option<f64>>) -> Result<Self> {
        if frame_indices.len() != values.len() {
            return Err(Error::Structure(format!(
                "{} frame indices for {} values",
                frame_indices.len(),
                values.len()
            )));
        }
        if frame_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Structure(
                "frame indices must be strictly increasing".into(),
            ));
        }
        Ok(IntensityCurve {
            frame_indices,
            values,
        })
    }

    pub fn frame_indices(&self) -> &[i64] {
        &self.frame_indices
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Two whitespace-separated columns, `frame_index value`, one row per
    /// frame; missing values are written as `NaN`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.frame_indices.iter().zip(&self.values) {
            match v {
                Some(v) => writeln!(out, "{i} {v}"),
                None => writeln!(out, "{i} NaN"),
            }
            .expect("writing to a String");
        }
        out
    }

    fn check_same_indices(&self, other: &IntensityCurve) -> Result<()> {
        if self.frame_indices != other.frame_indices {
            return Err(Error::Structure(format!(
                "curves cover different frames: {:?} vs {:?}",
                self.frame_indices, other.frame_indices
            )));
        }
        Ok(())
    }
}

/// Per-frame intensities in index order. Frames whose value is undefined
/// (for instance an empty mask) become missing entries.
pub fn curve(
    frames: &[IntensityFrame],
    masks: &[Mask],
    indices: &[i64],
    stat: IntensityStat,
) -> Result<IntensityCurve> {
    if frames.len() != masks.len() || frames.len() != indices.len() {
        return Err(Error::Structure(format!(
            "{} frames, {} masks and {} indices",
            frames.len(),
            masks.len(),
            indices.len()
        )));
    }
    let values = frames
        .iter()
        .zip(masks)
        .map(|(f, m)| frame_intensity_with(f, m, stat).ok())
        .collect();
    IntensityCurve::new(indices.to_vec(), values)
}

/// Pointwise mean over the curves that have a value at each frame.
pub fn average_curves(curves: &[IntensityCurve]) -> Result<IntensityCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Structure("no curves to average".into()))?;
    for c in &curves[1..] {
        first.check_same_indices(c)?;
    }
    let values = (0..first.len())
        .map(|k| {
            let present: Vec<f64> = curves.iter().filter_map(|c| c.values[k]).collect();
            (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
        })
        .collect();
    Ok(IntensityCurve {
        frame_indices: first.frame_indices.clone(),
        values,
    })
}

/// Mean absolute pointwise difference over frames where both curves have a
/// value.
pub fn curve_error(candidate: &IntensityCurve, reference: &IntensityCurve) -> Result<f64> {
    candidate.check_same_indices(reference)?;
    let diffs: Vec<f64> = candidate
        .values
        .iter()
        .zip(&reference.values)
        .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
        .collect();
    if diffs.is_empty() {
        return Err(Error::UndefinedMetric(
            "curves share no frame with values on both sides".into(),
        ));
    }
    Ok(diffs.iter().sum::<f64>() / diffs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve_of(values: &[f64]) -> IntensityCurve {
        IntensityCurve::new(
            (0..values.len() as i64).collect(),
            values.iter().map(|&v| Some(v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn frame_means() {
        let frame = IntensityFrame::new(3, 1, vec![100.0, 50.0, 7.0]).unwrap();
        let mask = Mask::from_coords(3, 1, [(0, 0), (0, 1)]).unwrap();
        assert_eq!(frame_intensity(&frame, &mask).unwrap(), 75.0);

        let frame = IntensityFrame::new(2, 2, vec![10.0, 20.0, 60.0, 255.0]).unwrap();
        let mask = Mask::from_coords(2, 2, [(0, 0), (0, 1), (1, 0)]).unwrap();
        assert_eq!(frame_intensity(&frame, &mask).unwrap(), 30.0);
        assert_eq!(
            frame_intensity_with(&frame, &mask, IntensityStat::Sum).unwrap(),
            90.0
        );
        assert_eq!(
            frame_intensity_with(&frame, &mask, IntensityStat::Median).unwrap(),
            20.0
        );
        assert_eq!(
            frame_intensity_with(&frame, &Mask::full(2, 2), IntensityStat::Median).unwrap(),
            40.0
        );
    }

    #[test]
    fn constant_frame() {
        let frame = IntensityFrame::constant(4, 4, 42.0).unwrap();
        let mask = Mask::from_coords(4, 4, [(0, 0), (3, 3), (2, 1)]).unwrap();
        assert_eq!(frame_intensity(&frame, &mask).unwrap(), 42.0);
    }

    #[test]
    fn frame_errors() {
        let frame = IntensityFrame::constant(2, 2, 1.0).unwrap();
        assert!(matches!(
            frame_intensity(&frame, &Mask::empty(2, 2)),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            frame_intensity(&frame, &Mask::full(3, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(IntensityFrame::new(1, 1, vec![256.0]).is_err());
        assert!(IntensityFrame::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn curve_per_frame_and_missing() {
        let frames: Vec<_> = [10.0, 20.0, 30.0]
            .iter()
            .map(|&v| IntensityFrame::constant(2, 2, v).unwrap())
            .collect();
        let full = Mask::full(2, 2);
        let c = curve(
            &frames,
            &vec![full.clone(); 3],
            &[1, 2, 3],
            IntensityStat::Mean,
        )
        .unwrap();
        assert_eq!(c.values(), &[Some(10.0), Some(20.0), Some(30.0)]);

        let masks = vec![full.clone(), Mask::empty(2, 2), full.clone()];
        let c = curve(&frames, &masks, &[1, 2, 3], IntensityStat::Mean).unwrap();
        assert_eq!(c.values(), &[Some(10.0), None, Some(30.0)]);
        assert_eq!(c.missing(), 1);
        assert_eq!(c.to_text(), "1 10\n2 NaN\n3 30\n");

        let c = curve(
            &frames[..1],
            std::slice::from_ref(&full),
            &[7],
            IntensityStat::Mean,
        )
        .unwrap();
        assert_eq!(c.len(), 1);

        assert!(curve(
            &frames,
            std::slice::from_ref(&full),
            &[1, 2, 3],
            IntensityStat::Mean
        )
        .is_err());
        assert!(curve(&frames, &vec![full; 3], &[1, 1, 2], IntensityStat::Mean).is_err());
    }

    #[test]
    fn averaging() {
        let avg = average_curves(&[curve_of(&[10.0, 20.0]), curve_of(&[30.0, 40.0])]).unwrap();
        assert_eq!(avg.values(), &[Some(20.0), Some(30.0)]);
        let one = curve_of(&[1.0, 2.0, 3.0]);
        assert_eq!(average_curves(std::slice::from_ref(&one)).unwrap(), one);
        assert_eq!(average_curves(&vec![one.clone(); 5]).unwrap(), one);

        let shifted = IntensityCurve::new(vec![1, 2, 3], vec![Some(1.0); 3]).unwrap();
        assert!(average_curves(&[one, shifted]).is_err());
        assert!(average_curves(&[]).is_err());

        let gappy = IntensityCurve::new(vec![0, 1], vec![None, Some(4.0)]).unwrap();
        let avg = average_curves(&[gappy, curve_of(&[2.0, 2.0])]).unwrap();
        assert_eq!(avg.values(), &[Some(2.0), Some(3.0)]);
    }

    #[test]
    fn errors_between_curves() {
        let a = curve_of(&[10.0, 20.0]);
        assert_eq!(curve_error(&a, &a).unwrap(), 0.0);
        assert_eq!(curve_error(&a, &curve_of(&[12.0, 18.0])).unwrap(), 2.0);
        assert_eq!(
            curve_error(&curve_of(&[5.0]), &curve_of(&[9.0])).unwrap(),
            4.0
        );

        let gappy = IntensityCurve::new(vec![0, 1], vec![None, Some(25.0)]).unwrap();
        assert_eq!(curve_error(&a, &gappy).unwrap(), 5.0);
        let blank = IntensityCurve::new(vec![0, 1], vec![None, None]).unwrap();
        assert!(curve_error(&a, &blank).is_err());
        assert!(curve_error(&a, &curve_of(&[1.0])).is_err());
    }
}
