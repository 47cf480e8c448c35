//! 8-bit grayscale raster codec for masks and frames.
//!
//! Decoding accepts binary or ASCII PGM and PNG. Masks are written as
//! binary PGM (`P5`, maxval 255) unless the path ends in `.png`;
//! foreground pixels are stored as 255 and background as 0.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{ColorType, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::perfusion::IntensityFrame;

/// Decoded 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader
        .decode()
        .map_err(|e| Error::decode(path, e.to_string()))?;
    if img.color() != ColorType::L8 {
        return Err(Error::decode(
            path,
            format!("expected 8-bit grayscale, found {:?}", img.color()),
        ));
    }
    let (width, height) = (img.width() as usize, img.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::decode(path, "raster has zero size"));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: img.into_luma8().into_raw(),
    })
}

/// Nonzero pixels are foreground.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let img = load_gray(path)?;
    Mask::from_bits(
        img.width,
        img.height,
        img.pixels.iter().map(|&p| p != 0).collect(),
    )
}

pub fn load_frame(path: &Path) -> Result<IntensityFrame> {
    let img = load_gray(path)?;
    IntensityFrame::from_u8(img.width, img.height, &img.pixels)
        .map_err(|e| Error::decode(path, e.to_string()))
}

/// Foreground 255, background 0.
pub fn mask_pixels(mask: &Mask) -> Vec<u8> {
    mask.bits()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect()
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn save_gray(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        image::save_buffer_with_format(
            path,
            pixels,
            width as u32,
            height as u32,
            ColorType::L8,
            ImageFormat::Png,
        )
        .map_err(|e| Error::decode(path, e.to_string()))
    } else {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&encode_pgm(width, height, pixels))
            .map_err(|e| Error::io(path, e))
    }
}

pub fn save_mask(path: &Path, mask: &Mask) -> Result<()> {
    save_gray(path, mask.width(), mask.height(), &mask_pixels(mask))
}
