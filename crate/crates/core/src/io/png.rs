//! 8-bit PNG in and out. Intensities are `value / 255` on the way in and
//! `round(255 · value)` on the way out.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageEncoder};

use crate::error::{Error, Result};
use crate::imaging::{to_grayscale, ColorImage, GrayImage};
use crate::video::FrameStack;

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Format(format!("{}: {other}", path.display())),
    })
}

pub fn read_color_png(path: &Path) -> Result<ColorImage> {
    let rgb = open(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    ColorImage::new(h as usize, w as usize, rgb.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect())
}

/// Grayscale PNGs are read as is; color PNGs go through the linear gray weights.
pub fn read_gray_png(path: &Path) -> Result<GrayImage> {
    let img = open(path)?;
    if img.color().has_color() {
        return Ok(to_grayscale(&read_color_png(path)?));
    }
    let luma = img.to_luma8();
    let (w, h) = luma.dimensions();
    GrayImage::new(h as usize, w as usize, luma.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect())
}

pub fn encode_color_png(img: &ColorImage) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    encode(&bytes, img.width(), img.height(), image::ExtendedColorType::Rgb8)
}

pub fn encode_gray_png(img: &GrayImage) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    encode(&bytes, img.width(), img.height(), image::ExtendedColorType::L8)
}

fn encode(bytes: &[u8], width: usize, height: usize, color: image::ExtendedColorType) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out).write_image(bytes, width as u32, height as u32, color)?;
    Ok(out)
}

pub fn write_color_png(path: &Path, img: &ColorImage) -> Result<()> {
    super::write_atomic(path, &encode_color_png(img)?)
}

pub fn write_gray_png(path: &Path, img: &GrayImage) -> Result<()> {
    super::write_atomic(path, &encode_gray_png(img)?)
}

/// `*.png` files of `dir` in lexicographic order.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    Ok(paths)
}

/// One grayscale frame per PNG, in lexicographic file order. All frames must
/// share one size.
pub fn read_frame_dir(dir: &Path) -> Result<FrameStack> {
    let paths = list_pngs(dir)?;
    if paths.is_empty() {
        return Err(Error::InsufficientData(format!("no PNG frames in {}", dir.display())));
    }
    let mut frames = Vec::with_capacity(paths.len());
    let mut dims = None;
    for path in &paths {
        let img = read_gray_png(path)?;
        let here = (img.height(), img.width());
        match dims {
            None => dims = Some(here),
            Some(first) if first != here => {
                return Err(Error::shape(format!(
                    "{} is {}x{}, earlier frames are {}x{}",
                    path.display(),
                    here.0,
                    here.1,
                    first.0,
                    first.1
                )));
            }
            Some(_) => {}
        }
        frames.push(img.data().to_vec());
    }
    let (h, w) = dims.expect("at least one frame");
    FrameStack::new(h, w, frames)
}
