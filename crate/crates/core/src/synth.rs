//! Seeded synthetic datasets shaped like a multi-annotator perfusion study.
//!
//! Each subject is a short sequence of frames showing a bright annulus (the
//! "myocardium") whose brightness ramps linearly over time. Every annotator
//! traces the annulus with slightly different radii, and the prediction is a
//! further perturbed annulus whose quality varies per frame. Grades are
//! derived from the prediction's extended Dice so both grade classes occur.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::raster::{encode_pgm, mask_pixels};
use crate::mask::{acceptable_region, AnnotationSet, Mask};
use crate::metrics::extended_dice;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub subjects: usize,
    pub frames: usize,
    pub annotators: usize,
    pub width: usize,
    pub height: usize,
    pub first_frame: i64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            subjects: 5,
            frames: 4,
            annotators: 3,
            width: 48,
            height: 48,
            first_frame: 61,
            seed: 7,
        }
    }
}

/// Annulus between radii `inner` and `outer` around `(cy, cx)`.
pub fn annulus(width: usize, height: usize, cy: f64, cx: f64, inner: f64, outer: f64) -> Mask {
    let bits = (0..height)
        .flat_map(|r| (0..width).map(move |c| (r, c)))
        .map(|(r, c)| {
            let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
            d >= inner && d <= outer
        })
        .collect();
    Mask::from_bits(width, height, bits).expect("grid sized to dimensions")
}

fn grade_for(score: f64) -> u8 {
    match score {
        s if s >= 0.97 => 4,
        s if s >= 0.9 => 3,
        s if s >= 0.8 => 2,
        _ => 1,
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes rasters under `frames/`, `masks/` and `predictions/` plus a
/// `manifest.csv` into `dir`, returning the manifest path. The same config
/// always produces byte-identical files.
pub fn write_dataset(dir: &Path, config: &SynthConfig) -> Result<PathBuf> {
    let (w, h) = (config.width, config.height);
    for sub in ["frames", "masks", "predictions"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut manifest =
        String::from("image_id,subject_id,frame_index,image_path,prediction_path,grade");
    for a in 0..config.annotators {
        write!(manifest, ",mask:c{}", a + 1).unwrap();
    }
    manifest.push('\n');

    let scale = w.min(h) as f64;
    for s in 0..config.subjects {
        let subject = format!("s{}", s + 1);
        let cy = h as f64 / 2.0 + rng.gen_range(-2.0..2.0);
        let cx = w as f64 / 2.0 + rng.gen_range(-2.0..2.0);
        let r_in = scale * rng.gen_range(0.16..0.22);
        let r_out = r_in + scale * rng.gen_range(0.12..0.18);
        let base = rng.gen_range(40.0..80.0);
        let slope = rng.gen_range(5.0..20.0);

        for f in 0..config.frames {
            let frame_index = config.first_frame + f as i64;
            let id = format!("{subject}_f{frame_index}");

            let masks: Vec<Mask> = (0..config.annotators)
                .map(|_| {
                    annulus(
                        w,
                        h,
                        cy,
                        cx,
                        r_in + rng.gen_range(-1.5..1.5),
                        r_out + rng.gen_range(-1.5..1.5),
                    )
                })
                .collect();
            let set = AnnotationSet::from_masks(masks.clone())?;

            let wobble = rng.gen_range(0.0..4.0);
            let prediction = annulus(
                w,
                h,
                cy + rng.gen_range(-wobble..=wobble),
                cx + rng.gen_range(-wobble..=wobble),
                r_in + rng.gen_range(-wobble..=wobble),
                r_out + rng.gen_range(-wobble..=wobble),
            );
            let grade = grade_for(extended_dice(&prediction, &acceptable_region(&set))?);

            let level = base + slope * f as f64;
            let myo = annulus(w, h, cy, cx, r_in, r_out);
            let pixels: Vec<u8> = myo
                .bits()
                .iter()
                .map(|&inside| {
                    let v = if inside { level } else { 15.0 } + rng.gen_range(-5.0..5.0);
                    v.round().clamp(0.0, 255.0) as u8
                })
                .collect();

            let frame_rel = format!("frames/{id}.pgm");
            let pred_rel = format!("predictions/{id}.pgm");
            write(&dir.join(&frame_rel), &encode_pgm(w, h, &pixels))?;
            write(
                &dir.join(&pred_rel),
                &encode_pgm(w, h, &mask_pixels(&prediction)),
            )?;
            write!(
                manifest,
                "{id},{subject},{frame_index},{frame_rel},{pred_rel},{grade}"
            )
            .unwrap();
            for (a, m) in masks.iter().enumerate() {
                let rel = format!("masks/{id}_c{}.pgm", a + 1);
                write(&dir.join(&rel), &encode_pgm(w, h, &mask_pixels(m)))?;
                write!(manifest, ",{rel}").unwrap();
            }
            manifest.push('\n');
        }
    }
    let path = dir.join("manifest.csv");
    write(&path, manifest.as_bytes())?;
    Ok(path)
}
