//! Renders dictionary atoms as a grid of tiles. Each atom is min-max
//! normalized on its own for display; nothing here feeds back into
//! computation.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::imaging::{devectorize_patch, ColorImage, GrayImage};
use crate::matrix::NonnegMatrix;
use crate::video::devectorize_frame;

/// How a dictionary column becomes a picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `3p²` color patch in red, blue, green block order.
    Patch { p: usize },
    /// `height·width` grayscale frame, first axis fastest.
    Frame { height: usize, width: usize },
    /// `series` stacked temporal curves of `d / series` points each.
    Temporal { series: usize },
}

impl Layout {
    /// Parses `patch`, `frame` or `temporal` with the matching parameters.
    pub fn parse(name: &str, p: Option<usize>, height: Option<usize>, width: Option<usize>, series: Option<usize>) -> Result<Self> {
        let need = |v: Option<usize>, what: &str| {
            v.ok_or_else(|| Error::Format(format!("layout `{name}` needs --{what}")))
        };
        match name {
            "patch" => Ok(Layout::Patch { p: need(p, "p")? }),
            "frame" => Ok(Layout::Frame { height: need(height, "height")?, width: need(width, "width")? }),
            "temporal" => Ok(Layout::Temporal { series: need(series, "series")? }),
            other => Err(Error::Format(format!("unknown layout `{other}` (expected patch, frame or temporal)"))),
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        let ok = match *self {
            Layout::Patch { p } => p > 0 && d == 3 * p * p,
            Layout::Frame { height, width } => height * width == d && d > 0,
            Layout::Temporal { series } => series > 0 && d % series == 0,
        };
        if ok { Ok(()) } else { Err(Error::Format(format!("{self:?} does not fit atoms of length {d}"))) }
    }
}

const SEPARATOR: usize = 2;
const BACKGROUND: [f64; 3] = [0.85, 0.85, 0.85];
const CURVE_TILE: usize = 96;
const PALETTE: [[f64; 3]; 6] = [
    [0.0, 0.3, 0.9],
    [0.85, 0.1, 0.1],
    [0.95, 0.75, 0.0],
    [0.0, 0.0, 0.0],
    [0.1, 0.6, 0.2],
    [0.6, 0.2, 0.7],
];

/// Grid of the first `max_atoms` atoms (all when `None`), `ceil(√n)` tiles per row.
pub fn render_dictionary_grid(w: &NonnegMatrix, layout: Layout, max_atoms: Option<usize>) -> Result<ColorImage> {
    layout.check(w.rows())?;
    let n = max_atoms.map_or(w.cols(), |m| m.min(w.cols())).max(1).min(w.cols());
    if n == 0 {
        return Err(Error::Format("dictionary has no atoms".into()));
    }
    let tiles: Vec<Tile> = (0..n).map(|j| tile(w.column(j), layout)).collect::<Result<_>>()?;
    let (th, tw) = (tiles[0].height, tiles[0].width);
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let height = rows * th + (rows + 1) * SEPARATOR;
    let width = cols * tw + (cols + 1) * SEPARATOR;
    let mut canvas = vec![BACKGROUND; height * width];
    for (idx, t) in tiles.iter().enumerate() {
        let top = SEPARATOR + (idx / cols) * (th + SEPARATOR);
        let left = SEPARATOR + (idx % cols) * (tw + SEPARATOR);
        for r in 0..th {
            for c in 0..tw {
                canvas[(top + r) * width + left + c] = t.pixels[r * tw + c];
            }
        }
    }
    ColorImage::new(height, width, canvas.into_iter().flatten().collect())
}

/// One frame atom as a grayscale image, min-max normalized.
pub fn frame_atom_image(atom: ArrayView1<f64>, height: usize, width: usize) -> Result<GrayImage> {
    let img = devectorize_frame(normalized(atom).view(), height, width)?;
    GrayImage::new(height, width, img.iter().copied().collect())
}

struct Tile {
    height: usize,
    width: usize,
    pixels: Vec<[f64; 3]>,
}

fn normalized(v: ArrayView1<f64>) -> Array1<f64> {
    let min = v.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let max = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let span = max - min;
    if span > 0.0 { v.mapv(|x| (x - min) / span) } else { Array1::zeros(v.len()) }
}

fn upscale(height: usize, width: usize, target: usize) -> usize {
    (target / height.max(width)).max(1)
}

fn tile(atom: ArrayView1<f64>, layout: Layout) -> Result<Tile> {
    let v = normalized(atom);
    match layout {
        Layout::Patch { p } => {
            let patch = devectorize_patch(v.view(), p)?;
            let s = upscale(p, p, 48);
            Ok(scaled(p, p, s, |r, c| patch.pixel(r, c)))
        }
        Layout::Frame { height, width } => {
            let img = devectorize_frame(v.view(), height, width)?;
            let s = upscale(height, width, 96);
            Ok(scaled(height, width, s, |r, c| [img[[r, c]]; 3]))
        }
        Layout::Temporal { series } => Ok(curves(v.view(), series)),
    }
}

fn scaled(height: usize, width: usize, s: usize, px: impl Fn(usize, usize) -> [f64; 3]) -> Tile {
    let (h, w) = (height * s, width * s);
    let pixels = (0..h * w).map(|i| px((i / w) / s, (i % w) / s)).collect();
    Tile { height: h, width: w, pixels }
}

fn curves(v: ArrayView1<f64>, series: usize) -> Tile {
    let k = v.len() / series;
    let size = CURVE_TILE;
    let margin = 6.0;
    let span = (size - 1) as f64 - 2.0 * margin;
    let mut pixels = vec![[1.0; 3]; size * size];
    let point = |j: usize, value: f64| {
        let x = if k > 1 { margin + span * j as f64 / (k - 1) as f64 } else { (size / 2) as f64 };
        let y = margin + span * (1.0 - value);
        (x, y)
    };
    for s in 0..series {
        let color = PALETTE[s % PALETTE.len()];
        let values: Vec<f64> = (0..k).map(|j| v[s * k + j]).collect();
        if k == 1 {
            let (x, y) = point(0, values[0]);
            plot(&mut pixels, size, x, y, color);
        }
        for j in 1..k {
            let (x0, y0) = point(j - 1, values[j - 1]);
            let (x1, y1) = point(j, values[j]);
            let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                plot(&mut pixels, size, x0 + t * (x1 - x0), y0 + t * (y1 - y0), color);
            }
        }
    }
    Tile { height: size, width: size, pixels }
}

fn plot(pixels: &mut [[f64; 3]], size: usize, x: f64, y: f64, color: [f64; 3]) {
    let (cx, cy) = (x.round() as i64, y.round() as i64);
    for dy in 0..2 {
        for dx in 0..2 {
            let (px, py) = (cx + dx, cy + dy);
            if (0..size as i64).contains(&px) && (0..size as i64).contains(&py) {
                pixels[py as usize * size + px as usize] = color;
            }
        }
    }
}
