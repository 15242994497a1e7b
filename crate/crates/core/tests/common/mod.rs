//! Synthetic fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use onmf::imaging::{ColorImage, GrayImage};
use onmf::io::png;
use onmf::rng;
use onmf::video::FrameStack;

/// Dark background, a bright candle body, and a flame blob that sways and
/// flickers smoothly over time.
pub fn candle_frames(height: usize, width: usize, len: usize) -> FrameStack {
    let (h, w) = (height as f64, width as f64);
    FrameStack::from_fn(height, width, len, |r, c, t| {
        let (y, x, t) = (r as f64, c as f64, t as f64);
        let sway = 0.06 * w * (2.0 * PI * t / 23.0).sin();
        let flicker = 0.8 + 0.15 * (2.0 * PI * t / 9.0).sin();
        let (fy, fx) = (0.3 * h, 0.5 * w + sway);
        let (sy, sx) = (0.12 * h, 0.12 * w);
        let flame = flicker * (-((y - fy) / sy).powi(2) / 2.0 - ((x - fx) / sx).powi(2) / 2.0).exp();
        let body = if y >= 0.5 * h && (x - 0.5 * w).abs() <= 0.15 * w { 0.6 } else { 0.0 };
        (0.05 + flame + body).min(1.0)
    })
    .unwrap()
}

/// Frames of i.i.d. uniform `[0, 1)` pixels.
pub fn noise_frames(height: usize, width: usize, len: usize, seed: u64) -> FrameStack {
    let mut gen = rng::seeded(seed, 99);
    let draws = rng::uniform_matrix(&mut gen, len, height * width);
    FrameStack::new(height, width, draws.rows().into_iter().map(|r| r.to_vec()).collect()).unwrap()
}

/// Candle frames followed by noise frames; the planted boundary is `candle - 1`.
pub fn candle_then_noise(height: usize, width: usize, candle: usize, noise: usize, seed: u64) -> FrameStack {
    candle_frames(height, width, candle).concat(&noise_frames(height, width, noise, seed)).unwrap()
}

/// A deterministic 100×100-style texture: stripes, rings and a checkerboard
/// in different channels.
pub fn textured_image(height: usize, width: usize) -> ColorImage {
    ColorImage::from_fn(height, width, |r, c| {
        let (y, x) = (r as f64, c as f64);
        let red = 0.5 + 0.4 * (2.0 * PI * x / 12.0).sin() * (2.0 * PI * y / 31.0).cos();
        let ring = ((y - 50.0).hypot(x - 40.0) / 5.0).sin();
        let green = 0.5 + 0.35 * ring;
        let blue = if (r / 8 + c / 8) % 2 == 0 { 0.8 } else { 0.2 };
        [red, green, 0.7 * blue + 0.1 * (y / height as f64)]
    })
    .unwrap()
}

/// Sinusoid with an offset, sampled at integer ticks.
pub fn sinusoid(len: usize, period: f64, amplitude: f64, level: f64, phase: f64) -> Vec<f64> {
    (0..len).map(|t| level + amplitude * (2.0 * PI * t as f64 / period + phase).sin()).collect()
}

/// `time,name...` CSV from full series.
pub fn series_csv(names: &[&str], series: &[Vec<Option<f64>>]) -> String {
    let mut out = String::from("time");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for t in 0..series[0].len() {
        out.push_str(&t.to_string());
        for s in series {
            out.push(',');
            if let Some(v) = s[t] {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Four correlated synthetic temperature-like series.
pub fn weather_series(len: usize) -> Vec<Vec<Option<f64>>> {
    (0..4)
        .map(|i| {
            let base = sinusoid(len, 24.0, 10.0 + i as f64, 55.0 + 5.0 * i as f64, 0.3 * i as f64);
            let slow = sinusoid(len, 97.0, 3.0, 0.0, i as f64);
            base.iter().zip(&slow).map(|(a, b)| Some(a + b)).collect()
        })
        .collect()
}

pub fn write_frames(dir: &Path, stack: &FrameStack) {
    std::fs::create_dir_all(dir).unwrap();
    for t in 0..stack.len() {
        let img = GrayImage::new(stack.height(), stack.width(), stack.frame(t).to_vec()).unwrap();
        png::write_gray_png(&dir.join(format!("frame_{t:04}.png")), &img).unwrap();
    }
}

/// A fixed smooth pattern plus uniform `[0, 0.2)` noise for `pattern` frames,
/// then `noise` frames of uniform `[0, 1)` noise; planted boundary `pattern - 1`.
pub fn pattern_then_noise(height: usize, width: usize, pattern: usize, noise: usize, seed: u64) -> FrameStack {
    let base = candle_frames(height, width, 1);
    let jitter = noise_frames(height, width, pattern, seed.wrapping_add(1_000));
    let first = FrameStack::from_fn(height, width, pattern, |r, c, t| {
        (base.get(r, c, 0) + 0.2 * jitter.get(r, c, t)).min(1.0)
    })
    .unwrap();
    first.concat(&noise_frames(height, width, noise, seed)).unwrap()
}
