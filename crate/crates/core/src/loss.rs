//! Soft extended-Dice loss over probabilistic predictions.
//!
//! With indicator grids `I` and `O` for the inner and outer regions and
//! probabilities `P`, the loss is
//!
//! ```text
//! L = [ Σ (P − P·O) + Σ (I − I·P) ] / Σ (P + I)  =  N / D
//! ```
//!
//! and its gradient follows from the quotient rule with
//! `∂N/∂Pₙ = 1 − Oₙ − Iₙ` and `∂D/∂Pₙ = 1`:
//!
//! ```text
//! ∂L/∂Pₙ = ((1 − Oₙ − Iₙ)·D − N) / D²
//! ```
//!
//! Pixels in the band between the regions only see the shared denominator
//! term, so predicting anything there costs nothing.

use crate::error::{Error, Result};
use crate::mask::{check_dims, AcceptableRegion, Mask};

/// Default threshold for turning probabilities into a mask; values strictly
/// above it are foreground.
pub const DEFAULT_BINARIZE_THRESHOLD: f64 = 0.5;

/// Per-pixel foreground probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPrediction {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SoftPrediction {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Structure(format!(
                "prediction of {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Domain(format!(
                "probability {v} at pixel ({}, {}) outside [0, 1]",
                i / width.max(1),
                i % width.max(1)
            )));
        }
        Ok(SoftPrediction {
            width,
            height,
            values,
        })
    }

    /// 0/1 probabilities from a mask.
    pub fn from_mask(mask: &Mask) -> Self {
        SoftPrediction {
            width: mask.width(),
            height: mask.height(),
            values: mask
                .bits()
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Foreground where the probability is strictly above `threshold`.
    pub fn binarize(&self, threshold: f64) -> Mask {
        Mask::from_bits(
            self.width,
            self.height,
            self.values.iter().map(|&v| v > threshold).collect(),
        )
        .expect("dimensions already validated")
    }
}

/// Loss value and its gradient with respect to every probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major `∂L/∂Pₙ`.
    pub gradient: Vec<f64>,
}

struct Sums {
    numerator: f64,
    denominator: f64,
}

fn sums(values: &[f64], region: &AcceptableRegion) -> Sums {
    let inner = region.inner().bits();
    let outer = region.outer().bits();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for ((&p, &i), &o) in values.iter().zip(inner).zip(outer) {
        let i = f64::from(u8::from(i));
        let o = f64::from(u8::from(o));
        numerator += (p - p * o) + (i - i * p);
        denominator += p + i;
    }
    Sums {
        numerator,
        denominator,
    }
}

fn loss_value(values: &[f64], region: &AcceptableRegion) -> Result<f64> {
    let s = sums(values, region);
    if s.denominator <= 0.0 {
        return Err(Error::Degenerate(
            "loss denominator Σ(P + I) is zero".into(),
        ));
    }
    Ok(s.numerator / s.denominator)
}

/// Extended-Dice loss and its analytic gradient.
pub fn extended_dice_loss(
    prediction: &SoftPrediction,
    region: &AcceptableRegion,
) -> Result<LossResult> {
    check_dims(region.dims(), prediction.dims())?;
    let s = sums(&prediction.values, region);
    if s.denominator <= 0.0 {
        return Err(Error::Degenerate(
            "loss denominator Σ(P + I) is zero".into(),
        ));
    }
    let (n, d) = (s.numerator, s.denominator);
    let d2 = d * d;
    let gradient = region
        .inner()
        .bits()
        .iter()
        .zip(region.outer().bits())
        .map(|(&i, &o)| {
            let dn = 1.0 - f64::from(u8::from(o)) - f64::from(u8::from(i));
            (dn * d - n) / d2
        })
        .collect();
    Ok(LossResult {
        value: n / d,
        width: prediction.width,
        height: prediction.height,
        gradient,
    })
}

/// Mean loss over a batch; gradients are scaled by `1 / batch_size` so they
/// are the gradient of the mean.
pub fn batch_extended_dice_loss(
    batch: &[(SoftPrediction, AcceptableRegion)],
) -> Result<(f64, Vec<LossResult>)> {
    if batch.is_empty() {
        return Err(Error::Degenerate("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut results = batch
        .iter()
        .map(|(p, r)| extended_dice_loss(p, r))
        .collect::<Result<Vec<_>>>()?;
    let mean = results.iter().map(|r| r.value).sum::<f64>() * scale;
    for r in &mut results {
        r.value *= scale;
        r.gradient.iter_mut().for_each(|g| *g *= scale);
    }
    Ok((mean, results))
}

/// Largest absolute gap between the analytic gradient and central finite
/// differences with the given step.
///
/// Every probability must lie in `[step, 1 − step]` so both perturbed points
/// stay in the domain.
pub fn finite_difference_check(
    prediction: &SoftPrediction,
    region: &AcceptableRegion,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0 && step < 0.5) {
        return Err(Error::Domain(format!("finite-difference step {step}")));
    }
    if let Some(v) = prediction
        .values
        .iter()
        .find(|&&v| v < step || v > 1.0 - step)
    {
        return Err(Error::Domain(format!(
            "probability {v} too close to the boundary for step {step}"
        )));
    }
    let analytic = extended_dice_loss(prediction, region)?;
    let mut probe = prediction.values.clone();
    let mut worst = 0.0f64;
    for (n, &g) in analytic.gradient.iter().enumerate() {
        let orig = probe[n];
        probe[n] = orig + step;
        let up = loss_value(&probe, region)?;
        probe[n] = orig - step;
        let down = loss_value(&probe, region)?;
        probe[n] = orig;
        let numeric = (up - down) / (2.0 * step);
        worst = worst.max((numeric - g).abs());
    }
    Ok(worst)
}
