//! Patch-based color image dictionaries: extraction, averaging, compression
//! and class-conditional color restoration from grayscale.
//!
//! A `p × p` color patch is vectorized into `3p²` entries: the red channel,
//! then blue, then green, each read column by column (first axis fastest).
//! [`devectorize_patch`] is the single inverse of that layout.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1};
use rand::RngExt;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::online::{OnlineDictionaryState, OnlineOptions};
use crate::rng;
use crate::solvers::{self, SolverOptions};

/// Linear RGB to gray weights.
pub const GRAY_WEIGHTS: [f64; 3] = [0.2989, 0.5870, 0.1140];

pub const DEFAULT_PATCH_LAMBDA: f64 = 0.1;

/// RGB image with intensities in `[0, 1]`, stored row-major with
/// interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ColorImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::shape(format!("{height}x{width} RGB image needs {} values", height * width * 3)));
        }
        check_unit_range(&data)?;
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for row in 0..height {
            for col in 0..width {
                data.extend_from_slice(&f(row, col));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Interleaved RGB, row-major.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Channel planes in vectorization order: red, blue, green.
    fn planes(&self) -> [Vec<f64>; 3] {
        let plane = |c: usize| self.data.iter().skip(c).step_by(3).copied().collect::<Vec<_>>();
        [plane(0), plane(2), plane(1)]
    }

    fn from_planes(height: usize, width: usize, planes: &[Vec<f64>]) -> Self {
        let (red, blue, green) = (&planes[0], &planes[1], &planes[2]);
        let mut data = Vec::with_capacity(height * width * 3);
        for i in 0..height * width {
            data.extend_from_slice(&[red[i], green[i], blue[i]]);
        }
        Self { height, width, data }
    }
}

/// Single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!("{height}x{width} gray image needs {} values", height * width)));
        }
        check_unit_range(&data)?;
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

fn check_unit_range(data: &[f64]) -> Result<()> {
    if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("intensity {bad} outside [0, 1]")));
    }
    Ok(())
}

/// Top-left anchors of `p × p` patches over a `height × width` image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub p: usize,
    pub stride: usize,
    pub height: usize,
    pub width: usize,
    pub anchors: Vec<(usize, usize)>,
}

impl PatchGrid {
    /// Regular grid with the given stride; the last row and column of anchors
    /// are clamped so that the final patch ends exactly at the border.
    pub fn regular(height: usize, width: usize, p: usize, stride: usize) -> Result<Self> {
        check_patch_fits(height, width, p)?;
        if stride == 0 || stride > p {
            return Err(Error::InvalidArgument(format!("stride must be in 1..={p}, got {stride}")));
        }
        let rows = axis_anchors(height, p, stride);
        let cols = axis_anchors(width, p, stride);
        let anchors = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();
        Ok(Self { p, stride, height, width, anchors })
    }

    /// Grid for a patch overlap, `stride = p − overlap`.
    pub fn with_overlap(height: usize, width: usize, p: usize, overlap: usize) -> Result<Self> {
        if overlap >= p {
            return Err(Error::InvalidArgument(format!("overlap must be below p={p}, got {overlap}")));
        }
        Self::regular(height, width, p, p - overlap)
    }
}

fn axis_anchors(len: usize, p: usize, stride: usize) -> Vec<usize> {
    let last = len - p;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().expect("p <= len") != last {
        out.push(last);
    }
    out
}

fn check_patch_fits(height: usize, width: usize, p: usize) -> Result<()> {
    if p == 0 || p > height.min(width) {
        return Err(Error::shape(format!("patch side {p} does not fit a {height}x{width} image")));
    }
    Ok(())
}

/// Vectorizes a `p × p` color patch as red, blue, green blocks, column-major.
pub fn vectorize_patch(patch: &ColorImage) -> Result<Vec<f64>> {
    if patch.height != patch.width {
        return Err(Error::shape(format!("patch is {}x{}, not square", patch.height, patch.width)));
    }
    let p = patch.height;
    let planes = patch.planes();
    let refs: Vec<&[f64]> = planes.iter().map(Vec::as_slice).collect();
    Ok(read_patch(&refs, p, p, (0, 0)))
}

/// Inverse of [`vectorize_patch`].
pub fn devectorize_patch(v: ArrayView1<f64>, p: usize) -> Result<ColorImage> {
    if v.len() != 3 * p * p {
        return Err(Error::shape(format!("vector of {} entries is not a {p}x{p} color patch", v.len())));
    }
    let mut planes = vec![vec![0.0; p * p]; 3];
    for (b, plane) in planes.iter_mut().enumerate() {
        for col in 0..p {
            for row in 0..p {
                plane[row * p + col] = v[b * p * p + col * p + row];
            }
        }
    }
    let img = ColorImage::from_planes(p, p, &planes);
    check_unit_range(&img.data)?;
    Ok(img)
}

fn read_patch(planes: &[&[f64]], width: usize, p: usize, (r0, c0): (usize, usize)) -> Vec<f64> {
    let mut v = Vec::with_capacity(planes.len() * p * p);
    for plane in planes {
        for col in 0..p {
            for row in 0..p {
                v.push(plane[(r0 + row) * width + c0 + col]);
            }
        }
    }
    v
}

fn extract_from_planes(planes: &[&[f64]], width: usize, p: usize, anchors: &[(usize, usize)]) -> Array2<f64> {
    let d = planes.len() * p * p;
    let mut x = Array2::zeros((d, anchors.len()));
    for (j, &anchor) in anchors.iter().enumerate() {
        for (i, v) in read_patch(planes, width, p, anchor).into_iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    x
}

fn average_into_planes(
    patches: &Array2<f64>,
    channels: usize,
    p: usize,
    anchors: &[(usize, usize)],
    height: usize,
    width: usize,
) -> Result<Vec<Vec<f64>>> {
    if patches.nrows() != channels * p * p || patches.ncols() != anchors.len() {
        return Err(Error::shape(format!(
            "patch matrix is {}x{}, expected {}x{}",
            patches.nrows(),
            patches.ncols(),
            channels * p * p,
            anchors.len()
        )));
    }
    let mut sums = vec![vec![0.0; height * width]; channels];
    let mut counts = vec![0u32; height * width];
    for (j, &(r0, c0)) in anchors.iter().enumerate() {
        if r0 + p > height || c0 + p > width {
            return Err(Error::shape(format!("patch at ({r0}, {c0}) leaves the {height}x{width} image")));
        }
        for col in 0..p {
            for row in 0..p {
                let pixel = (r0 + row) * width + c0 + col;
                counts[pixel] += 1;
                for (b, plane) in sums.iter_mut().enumerate() {
                    plane[pixel] += patches[[b * p * p + col * p + row, j]];
                }
            }
        }
    }
    if let Some(pixel) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Coverage { row: pixel / width, col: pixel % width });
    }
    for plane in &mut sums {
        for (v, &c) in plane.iter_mut().zip(&counts) {
            *v = (*v / f64::from(c)).clamp(0.0, 1.0);
        }
    }
    Ok(sums)
}

/// How [`extract_patches`] chooses anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchMode {
    /// `count` anchors drawn uniformly with replacement.
    Random { count: usize, seed: u64 },
    /// Regular clamped grid.
    Grid { stride: usize },
}

/// Returns the `3p² × n` matrix of vectorized patches and their anchors.
pub fn extract_patches(image: &ColorImage, p: usize, mode: PatchMode) -> Result<(Array2<f64>, Vec<(usize, usize)>)> {
    check_patch_fits(image.height, image.width, p)?;
    let anchors = match mode {
        PatchMode::Grid { stride } => PatchGrid::regular(image.height, image.width, p, stride)?.anchors,
        PatchMode::Random { count, seed } => {
            let mut gen = rng::seeded(seed, rng::STREAM_PATCHES);
            (0..count)
                .map(|_| {
                    (gen.random_range(0..=image.height - p), gen.random_range(0..=image.width - p))
                })
                .collect()
        }
    };
    let planes = image.planes();
    let refs: Vec<&[f64]> = planes.iter().map(Vec::as_slice).collect();
    Ok((extract_from_planes(&refs, image.width, p, &anchors), anchors))
}

/// Uniform average of overlapping color patches, clamped to `[0, 1]`.
pub fn average_patches(
    patches: &Array2<f64>,
    anchors: &[(usize, usize)],
    p: usize,
    height: usize,
    width: usize,
) -> Result<ColorImage> {
    let planes = average_into_planes(patches, 3, p, anchors, height, width)?;
    Ok(ColorImage::from_planes(height, width, &planes))
}

/// Settings for [`train_patch_dictionary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchTraining {
    pub p: usize,
    pub r: usize,
    pub batches: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
}

/// One online step per batch of random patches, drawn with replacement
/// across all `images` (image chosen uniformly, then the anchor).
pub fn train_patch_dictionary(images: &[ColorImage], cfg: &PatchTraining) -> Result<OnlineDictionaryState> {
    if images.is_empty() {
        return Err(Error::InvalidArgument("no training images".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    for img in images {
        check_patch_fits(img.height, img.width, cfg.p)?;
    }
    let d = 3 * cfg.p * cfg.p;
    let mut state = OnlineDictionaryState::init(d, cfg.r, cfg.lambda, cfg.seed)?;
    let planes: Vec<[Vec<f64>; 3]> = images.iter().map(ColorImage::planes).collect();
    let mut gen = rng::seeded(cfg.seed, rng::STREAM_PATCHES);
    let opts = OnlineOptions::default();
    for _ in 0..cfg.batches {
        let mut batch = Array2::zeros((d, cfg.batch_size));
        for j in 0..cfg.batch_size {
            let which = gen.random_range(0..images.len());
            let img = &images[which];
            let anchor = (gen.random_range(0..=img.height - cfg.p), gen.random_range(0..=img.width - cfg.p));
            let refs: Vec<&[f64]> = planes[which].iter().map(Vec::as_slice).collect();
            for (i, v) in read_patch(&refs, img.width, cfg.p, anchor).into_iter().enumerate() {
                batch[[i, j]] = v;
            }
        }
        state.step_with(&NonnegMatrix::from_array_unchecked(batch), &opts)?;
    }
    Ok(state)
}

fn patch_side(rows: usize, channels: usize) -> Result<usize> {
    let p = ((rows / channels) as f64).sqrt().round() as usize;
    if p == 0 || channels * p * p != rows {
        return Err(Error::shape(format!("{rows} rows is not {channels}·p² for any p")));
    }
    Ok(p)
}

fn check_dictionary_side(w: &NonnegMatrix, channels: usize, p: usize) -> Result<()> {
    if w.rows() != channels * p * p {
        return Err(Error::shape(format!(
            "dictionary has {} rows, patch side {p} needs {}",
            w.rows(),
            channels * p * p
        )));
    }
    Ok(())
}

/// Codes every grid patch against `w`, rebuilds each as `W·h` and averages.
pub fn compress_image(image: &ColorImage, w: &NonnegMatrix, p: usize, overlap: usize, lambda: f64) -> Result<ColorImage> {
    check_dictionary_side(w, 3, p)?;
    let grid = PatchGrid::with_overlap(image.height, image.width, p, overlap)?;
    let planes = image.planes();
    let refs: Vec<&[f64]> = planes.iter().map(Vec::as_slice).collect();
    let x = NonnegMatrix::from_array_unchecked(extract_from_planes(&refs, image.width, p, &grid.anchors));
    let h = solvers::sparse_code(&x, w, &SolverOptions::with_lambda(lambda))?;
    let rebuilt = w.dot(h.as_array());
    average_patches(&rebuilt, &grid.anchors, p, image.height, image.width)
}

fn gray_of(rgb: [f64; 3]) -> f64 {
    GRAY_WEIGHTS[0] * rgb[0] + GRAY_WEIGHTS[1] * rgb[1] + GRAY_WEIGHTS[2] * rgb[2]
}

/// Per-pixel linear conversion with [`GRAY_WEIGHTS`].
pub fn to_grayscale(image: &ColorImage) -> GrayImage {
    let data = image.data.chunks_exact(3).map(|px| gray_of([px[0], px[1], px[2]])).collect();
    GrayImage { height: image.height, width: image.width, data }
}

/// Collapses each atom's red, blue and green blocks into one `p²` gray block.
pub fn dictionary_to_grayscale(w: &NonnegMatrix) -> Result<NonnegMatrix> {
    let p2 = patch_side(w.rows(), 3)?.pow(2);
    let gray = Array2::from_shape_fn((p2, w.cols()), |(i, j)| {
        gray_of([w[[i, j]], w[[2 * p2 + i, j]], w[[p2 + i, j]]])
    });
    Ok(NonnegMatrix::from_clamped(gray))
}

/// Class of every grid anchor, as supplied by an external classifier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassLabelMap {
    labels: BTreeMap<(usize, usize), u32>,
}

impl ClassLabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every anchor of `grid` labeled `class`.
    pub fn uniform(grid: &PatchGrid, class: u32) -> Self {
        Self { labels: grid.anchors.iter().map(|&a| (a, class)).collect() }
    }

    pub fn insert(&mut self, anchor: (usize, usize), class: u32) {
        self.labels.insert(anchor, class);
    }

    pub fn get(&self, anchor: (usize, usize)) -> Option<u32> {
        self.labels.get(&anchor).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.labels.iter().map(|(&a, &c)| (a, c))
    }
}

/// Restores color: each gray patch is coded against the grayscale version of
/// its class dictionary, and the same code applied to the color dictionary
/// gives the color patch. Patches are then averaged.
pub fn restore_color(
    gray: &GrayImage,
    labels: &ClassLabelMap,
    dicts: &BTreeMap<u32, NonnegMatrix>,
    p: usize,
    overlap: usize,
    lambda: f64,
) -> Result<ColorImage> {
    let grid = PatchGrid::with_overlap(gray.height, gray.width, p, overlap)?;
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (j, &anchor) in grid.anchors.iter().enumerate() {
        let class = labels.get(anchor).ok_or(Error::Coverage { row: anchor.0, col: anchor.1 })?;
        by_class.entry(class).or_default().push(j);
    }
    for (&class, w) in dicts {
        check_dictionary_side(w, 3, p).map_err(|e| Error::shape(format!("class {class}: {e}")))?;
    }

    let gray_planes = [gray.data.as_slice()];
    let opts = SolverOptions::with_lambda(lambda);
    let coded: Vec<(Vec<usize>, Array2<f64>)> = by_class
        .into_par_iter()
        .map(|(class, members)| {
            let w = dicts.get(&class).ok_or_else(|| Error::Format(format!("no dictionary for class {class}")))?;
            let w_gray = dictionary_to_grayscale(w)?;
            let anchors: Vec<_> = members.iter().map(|&j| grid.anchors[j]).collect();
            let x = NonnegMatrix::from_array_unchecked(extract_from_planes(&gray_planes, gray.width, p, &anchors));
            let h = solvers::sparse_code(&x, &w_gray, &opts)?;
            Ok((members, w.dot(h.as_array())))
        })
        .collect::<Result<_>>()?;

    let mut color = Array2::zeros((3 * p * p, grid.anchors.len()));
    for (members, patches) in coded {
        for (k, &j) in members.iter().enumerate() {
            color.column_mut(j).assign(&patches.column(k));
        }
    }
    average_patches(&color, &grid.anchors, p, gray.height, gray.width)
}

/// `10·log10(1 / MSE)` for intensities in `[0, 1]`; infinite for identical images.
pub fn psnr(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(Error::shape("images differ in size"));
    }
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64;
    Ok(10.0 * (1.0 / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn textured(h: usize, w: usize) -> ColorImage {
        ColorImage::from_fn(h, w, |r, c| {
            let (x, y) = (r as f64, c as f64);
            [
                0.5 + 0.4 * (x * 0.3).sin() * (y * 0.2).cos(),
                0.5 + 0.4 * ((x + y) * 0.15).sin(),
                0.5 + 0.3 * (y * 0.45).sin(),
            ]
        })
        .unwrap()
    }

    #[test]
    fn single_pixel_channel_order() {
        let px = ColorImage::new(1, 1, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(vectorize_patch(&px).unwrap(), vec![0.1, 0.3, 0.2]);
    }

    #[test]
    fn vectorize_layout_and_roundtrip() {
        let patch = textured(3, 3);
        let v = vectorize_patch(&patch).unwrap();
        assert_eq!(v.len(), 27);
        // Second entry of the red block is pixel (1, 0): first axis fastest.
        assert_eq!(v[1], patch.pixel(1, 0)[0]);
        assert_eq!(v[3], patch.pixel(0, 1)[0]);
        assert_eq!(v[9], patch.pixel(0, 0)[2]);
        assert_eq!(v[18], patch.pixel(0, 0)[1]);
        assert_eq!(devectorize_patch(Array1::from(v).view(), 3).unwrap(), patch);
        assert_eq!(vectorize_patch(&textured(20, 20)).unwrap().len(), 1200);
    }

    #[test]
    fn grid_examples() {
        let g = PatchGrid::regular(40, 40, 20, 20).unwrap();
        assert_eq!(g.anchors, vec![(0, 0), (0, 20), (20, 0), (20, 20)]);
        let g = PatchGrid::regular(50, 40, 20, 5).unwrap();
        let rows: Vec<usize> = g.anchors.iter().map(|a| a.0).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let cols: Vec<usize> = g.anchors.iter().map(|a| a.1).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        assert_eq!(rows, vec![0, 5, 10, 15, 20, 25, 30]);
        assert_eq!(cols, vec![0, 5, 10, 15, 20]);
        let g = PatchGrid::regular(23, 20, 10, 10).unwrap();
        assert_eq!(g.anchors.iter().map(|a| a.0).max(), Some(13));
        assert!(PatchGrid::regular(10, 10, 11, 1).is_err());
        assert!(PatchGrid::regular(10, 10, 5, 6).is_err());
    }

    #[test]
    fn random_extraction_shape() {
        let img = textured(40, 30);
        let (x, anchors) = extract_patches(&img, 20, PatchMode::Random { count: 1000, seed: 1 }).unwrap();
        assert_eq!(x.dim(), (1200, 1000));
        assert!(anchors.iter().all(|&(r, c)| r <= 20 && c <= 10));
        assert!(matches!(extract_patches(&img, 31, PatchMode::Grid { stride: 1 }), Err(Error::Shape(_))));
    }

    #[test]
    fn averaging_examples() {
        let patches = Array2::from_shape_vec((3, 2), vec![0.2, 0.4, 0.2, 0.4, 0.2, 0.4]).unwrap();
        let img = average_patches(&patches, &[(0, 0), (0, 0)], 1, 1, 1).unwrap();
        for v in img.pixel(0, 0) {
            assert!((v - 0.3).abs() < 1e-15);
        }
        let patch = textured(4, 4);
        let v = Array2::from_shape_vec((48, 1), vectorize_patch(&patch).unwrap()).unwrap();
        assert_eq!(average_patches(&v, &[(0, 0)], 4, 4, 4).unwrap(), patch);
        let e = average_patches(&v, &[(0, 0)], 4, 5, 4);
        assert!(matches!(e, Err(Error::Coverage { row: 4, col: 0 })));
    }

    #[test]
    fn grayscale_weights() {
        let white = ColorImage::new(1, 1, vec![1.0, 1.0, 1.0]).unwrap();
        assert!((to_grayscale(&white).get(0, 0) - 0.9999).abs() < 1e-15);
        let red = ColorImage::new(1, 1, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(to_grayscale(&red).get(0, 0), 0.2989);
    }

    #[test]
    fn gray_dictionary_matches_gray_patches() {
        let patch = textured(5, 5);
        let w = NonnegMatrix::from_row_major(75, 1, vectorize_patch(&patch).unwrap()).unwrap();
        let g = dictionary_to_grayscale(&w).unwrap();
        let gray = to_grayscale(&patch);
        for col in 0..5 {
            for row in 0..5 {
                assert!((g[[col * 5 + row, 0]] - gray.get(row, col)).abs() < 1e-15);
            }
        }
        assert!(dictionary_to_grayscale(&NonnegMatrix::zeros(10, 1)).is_err());
    }

    #[test]
    fn exact_dictionary_compresses_losslessly() {
        let img = ColorImage::from_fn(4, 4, |_, c| if c < 2 { [0.9, 0.1, 0.2] } else { [0.1, 0.3, 0.8] }).unwrap();
        let (patches, _) = extract_patches(&img, 2, PatchMode::Grid { stride: 2 }).unwrap();
        let w = NonnegMatrix::new(patches).unwrap();
        let out = compress_image(&img, &w, 2, 0, 0.0).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!(matches!(compress_image(&img, &w, 3, 0, 0.0), Err(Error::Shape(_))));
    }

    #[test]
    fn flat_image_single_atom() {
        let img = ColorImage::from_fn(30, 30, |_, _| [0.6, 0.3, 0.2]).unwrap();
        let cfg = PatchTraining { p: 5, r: 1, batches: 5, batch_size: 50, lambda: 0.0, seed: 4 };
        let state = train_patch_dictionary(&[img.clone()], &cfg).unwrap();
        assert_eq!(state.dictionary().dim(), (75, 1));
        let out = compress_image(&img, state.dictionary(), 5, 2, 0.0).unwrap();
        let err = out.data().iter().zip(img.data()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-3, "max error {err}");
    }

    #[test]
    fn restore_requires_labels_and_dictionaries() {
        let img = textured(12, 12);
        let gray = to_grayscale(&img);
        let (patches, _) = extract_patches(&img, 4, PatchMode::Random { count: 6, seed: 0 }).unwrap();
        let mut dicts = BTreeMap::new();
        dicts.insert(0, NonnegMatrix::new(patches).unwrap());
        let grid = PatchGrid::with_overlap(12, 12, 4, 2).unwrap();
        let e = restore_color(&gray, &ClassLabelMap::new(), &dicts, 4, 2, 0.0);
        assert!(matches!(e, Err(Error::Coverage { row: 0, col: 0 })));
        let e = restore_color(&gray, &ClassLabelMap::uniform(&grid, 1), &dicts, 4, 2, 0.0);
        assert!(matches!(e, Err(Error::Format(_))));
        let out = restore_color(&gray, &ClassLabelMap::uniform(&grid, 0), &dicts, 4, 2, 0.0).unwrap();
        assert_eq!((out.height(), out.width()), (12, 12));
    }

    #[test]
    fn restore_exact_single_patch() {
        // Atoms with distinct gray profiles; the gray patch is an exact combination.
        let atom = |seed: usize| {
            ColorImage::from_fn(3, 3, |r, c| {
                let t = ((r * 3 + c + seed * 5) % 7) as f64 / 7.0;
                [t, 1.0 - t, (t * 0.5 + 0.2 * seed as f64).min(1.0)]
            })
            .unwrap()
        };
        let mut w = Array2::zeros((27, 2));
        for s in 0..2 {
            let v = vectorize_patch(&atom(s)).unwrap();
            w.column_mut(s).assign(&Array1::from(v));
        }
        let w = NonnegMatrix::new(w).unwrap();
        let h0 = ndarray::array![0.6, 0.3];
        let color = w.dot(&h0);
        let target = devectorize_patch(color.view(), 3).unwrap();
        let gray = to_grayscale(&target);
        let mut dicts = BTreeMap::new();
        dicts.insert(7, w);
        let grid = PatchGrid::regular(3, 3, 3, 1).unwrap();
        let out = restore_color(&gray, &ClassLabelMap::uniform(&grid, 7), &dicts, 3, 0, 0.0).unwrap();
        for (a, b) in out.data().iter().zip(target.data()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn psnr_of_identical_is_infinite() {
        let a = textured(4, 4);
        assert!(psnr(&a, &a).unwrap().is_infinite());
    }
}
