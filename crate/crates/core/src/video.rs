//! Grayscale frame stacks: spatial dictionaries and changepoint detection
//! from a temporal factorization.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::nmf;
use crate::online::{OnlineDictionaryState, OnlineOptions};
use crate::rng;

/// Scores below this mean the stack shows no significant change.
pub const NO_CHANGE_THRESHOLD: f64 = 0.05;

pub const DEFAULT_DETECT_ITERS: usize = 300;

/// `T` grayscale frames of `height × width`, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    height: usize,
    width: usize,
    frames: Vec<Vec<f64>>,
}

impl FrameStack {
    /// `frames[t]` is frame `t` in row-major order.
    pub fn new(height: usize, width: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        for (t, f) in frames.iter().enumerate() {
            if f.len() != height * width {
                return Err(Error::shape(format!(
                    "frame {t} has {} pixels, expected {height}x{width}",
                    f.len()
                )));
            }
            if let Some(v) = f.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidArgument(format!("frame {t}: intensity {v} outside [0, 1]")));
            }
        }
        Ok(Self { height, width, frames })
    }

    pub fn from_fn(height: usize, width: usize, len: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let frames = (0..len)
            .map(|t| (0..height * width).map(|i| f(i / width, i % width, t)).collect())
            .collect();
        Self::new(height, width, frames)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn get(&self, row: usize, col: usize, t: usize) -> f64 {
        self.frames[t][row * self.width + col]
    }

    /// Row-major pixels of frame `t`.
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t]
    }

    /// Frames of `self` followed by those of `other`.
    pub fn concat(&self, other: &FrameStack) -> Result<FrameStack> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::shape("frame sizes differ"));
        }
        let mut frames = self.frames.clone();
        frames.extend(other.frames.iter().cloned());
        Ok(FrameStack { height: self.height, width: self.width, frames })
    }

    /// Every intensity multiplied by `c`; fails if that leaves `[0, 1]`.
    pub fn scaled(&self, c: f64) -> Result<FrameStack> {
        let frames = self.frames.iter().map(|f| f.iter().map(|v| v * c).collect()).collect();
        FrameStack::new(self.height, self.width, frames)
    }

    /// Frame `t` vectorized along the first axis (column-major).
    fn vectorize(&self, t: usize) -> impl Iterator<Item = f64> + '_ {
        let (h, w) = (self.height, self.width);
        (0..h * w).map(move |i| self.frames[t][(i % h) * w + i / h])
    }
}

/// Matrix orientation for [`frames_to_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `(H·W) × T`: one vectorized frame per column.
    SpaceMajor,
    /// `T × (H·W)`: the transpose.
    TimeMajor,
}

pub fn frames_to_matrix(stack: &FrameStack, orientation: Orientation) -> NonnegMatrix {
    let pixels = stack.height * stack.width;
    let mut x = Array2::zeros((pixels, stack.len()));
    for t in 0..stack.len() {
        for (i, v) in stack.vectorize(t).enumerate() {
            x[[i, t]] = v;
        }
    }
    let x = match orientation {
        Orientation::SpaceMajor => x,
        Orientation::TimeMajor => x.reversed_axes().as_standard_layout().to_owned(),
    };
    NonnegMatrix::from_array_unchecked(x)
}

/// `height × width` image of a vectorized frame or atom (first axis fastest).
pub fn devectorize_frame(v: ArrayView1<f64>, height: usize, width: usize) -> Result<Array2<f64>> {
    if v.len() != height * width {
        return Err(Error::shape(format!("{} entries do not form a {height}x{width} frame", v.len())));
    }
    Ok(Array2::from_shape_fn((height, width), |(r, c)| v[c * height + r]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialMode {
    /// Multiplicative-update NMF on the whole `(H·W) × T` matrix.
    Offline { iters: usize, seed: u64 },
    /// One online step per frame, in time order.
    Online { lambda: f64, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct SpatialDictionary {
    /// `(H·W) × r`.
    pub w: NonnegMatrix,
    /// Atoms as `height × width` images, unnormalized.
    pub atoms: Vec<Array2<f64>>,
    /// `(frames seen, W)` at each requested frame count (online mode only).
    pub snapshots: Vec<(usize, NonnegMatrix)>,
}

/// Learns `r` spatial atoms. `snapshot_frames` are one-based frame counts
/// after which the online dictionary is recorded; counts past the end of the
/// stack are ignored.
pub fn learn_spatial_dictionary(
    stack: &FrameStack,
    r: usize,
    mode: SpatialMode,
    snapshot_frames: &[usize],
) -> Result<SpatialDictionary> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    if stack.is_empty() {
        return Err(Error::InsufficientData("no frames".into()));
    }
    let x = frames_to_matrix(stack, Orientation::SpaceMajor);
    let mut snapshots = Vec::new();
    let w = match mode {
        SpatialMode::Offline { iters, seed } => nmf::fit_nmf(&x, r, iters, seed)?.w,
        SpatialMode::Online { lambda, seed } => {
            let mut state = OnlineDictionaryState::init(x.rows(), r, lambda, seed)?;
            let opts = OnlineOptions::default();
            for t in 0..stack.len() {
                let frame = x.column(t).to_owned().insert_axis(ndarray::Axis(1));
                state.step_with(&NonnegMatrix::from_array_unchecked(frame), &opts)?;
                if snapshot_frames.contains(&(t + 1)) {
                    snapshots.push((t + 1, state.dictionary().clone()));
                }
            }
            state.dictionary().clone()
        }
    };
    let atoms = w
        .columns()
        .into_iter()
        .map(|col| devectorize_frame(col, stack.height, stack.width))
        .collect::<Result<_>>()?;
    Ok(SpatialDictionary { w, atoms, snapshots })
}

/// Per-boundary change scores from a temporal dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeReport {
    /// `scores[t]` measures the change between frames `t` and `t + 1`.
    pub scores: Vec<f64>,
    /// Zero-based boundary with the largest score (first on ties).
    pub changepoint: usize,
    /// Largest score reaches [`NO_CHANGE_THRESHOLD`].
    pub significant: bool,
    /// The `T × r` temporal dictionary, columns scaled to unit max.
    pub dictionary: NonnegMatrix,
}

/// Factorizes the `T × (H·W)` matrix as `W·H` with `W: T × r` and scores each
/// frame boundary by `Σ_j |W[t+1, j] − W[t, j]|` on max-normalized columns.
///
/// All rows of the initial `W` are the same seeded random vector and the
/// initial `H` is scaled by the mean intensity, so identical frames keep
/// identical rows and a global intensity scale leaves the dictionary unchanged.
pub fn detect_changepoint(stack: &FrameStack, r: usize, iters: usize, seed: u64) -> Result<ChangeReport> {
    let len = stack.len();
    if len < 3 {
        return Err(Error::InsufficientData(format!("changepoint detection needs at least 3 frames, got {len}")));
    }
    if r == 0 || r >= len {
        return Err(Error::InvalidRank { rank: r, limit: len });
    }
    let x = frames_to_matrix(stack, Orientation::TimeMajor);
    let mut gen = rng::seeded(seed, rng::STREAM_DETECT_INIT);
    let row = rng::uniform_matrix(&mut gen, 1, r);
    let w0 = Array2::from_shape_fn((len, r), |(_, j)| row[[0, j]]);
    let mean = x.mean().unwrap_or(0.0);
    let scale = if mean > 0.0 { mean } else { 1.0 };
    let h0 = rng::uniform_matrix(&mut gen, r, x.cols()) * scale;
    let fit = nmf::fit_nmf_from(
        &x,
        NonnegMatrix::from_array_unchecked(w0),
        NonnegMatrix::from_clamped(h0),
        iters,
        nmf::DEFAULT_EPSILON_DIV,
    )?;

    let mut w = fit.w.into_array();
    for mut col in w.columns_mut() {
        let max = col.iter().fold(0.0_f64, |m, &v| m.max(v));
        if max > 0.0 {
            col.mapv_inplace(|v| v / max);
        }
    }
    let scores: Vec<f64> = (0..len - 1)
        .map(|t| {
            let diff: Array1<f64> = &w.row(t + 1) - &w.row(t);
            diff.iter().map(|v| v.abs()).sum()
        })
        .collect();
    let (changepoint, best) = scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(ChangeReport {
        scores,
        changepoint,
        significant: best >= NO_CHANGE_THRESHOLD,
        dictionary: NonnegMatrix::from_array_unchecked(w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn degenerate_stack_matrix() {
        let s = FrameStack::new(1, 1, vec![vec![0.1], vec![0.2], vec![0.3]]).unwrap();
        let x = frames_to_matrix(&s, Orientation::SpaceMajor);
        assert_eq!(x.as_array(), &array![[0.1, 0.2, 0.3]]);
    }

    #[test]
    fn orientations_are_transposes_and_devectorize() {
        let s = FrameStack::from_fn(4, 3, 5, |r, c, t| ((r * 3 + c + t) % 7) as f64 / 7.0).unwrap();
        let a = frames_to_matrix(&s, Orientation::SpaceMajor);
        let b = frames_to_matrix(&s, Orientation::TimeMajor);
        assert_eq!(a.dim(), (12, 5));
        assert_eq!(a.t(), b.view());
        for t in 0..5 {
            let img = devectorize_frame(a.column(t), 4, 3).unwrap();
            for r in 0..4 {
                for c in 0..3 {
                    assert_eq!(img[[r, c]], s.get(r, c, t));
                }
            }
        }
        assert_eq!(a[[1, 0]], s.get(1, 0, 0));
    }

    #[test]
    fn frame_validation() {
        assert!(FrameStack::new(2, 2, vec![vec![0.0; 3]]).is_err());
        assert!(FrameStack::new(1, 1, vec![vec![1.5]]).is_err());
    }

    #[test]
    fn detection_preconditions() {
        let s = FrameStack::from_fn(2, 2, 2, |_, _, _| 0.5).unwrap();
        assert!(matches!(detect_changepoint(&s, 1, 10, 0), Err(Error::InsufficientData(_))));
        let s = FrameStack::from_fn(2, 2, 4, |_, _, _| 0.5).unwrap();
        assert!(matches!(detect_changepoint(&s, 4, 10, 0), Err(Error::InvalidRank { rank: 4, limit: 4 })));
    }

    #[test]
    fn constant_stack_has_no_change() {
        let s = FrameStack::from_fn(6, 5, 12, |r, c, _| 0.2 + 0.05 * (r + c) as f64).unwrap();
        let report = detect_changepoint(&s, 3, 100, 1).unwrap();
        assert_eq!(report.scores.len(), 11);
        assert!(report.scores.iter().all(|&v| v <= 1e-6), "{:?}", report.scores);
        assert!(!report.significant);
    }

    #[test]
    fn identical_frames_online_atom_aligns() {
        let frame = |r: usize, c: usize| 0.1 + 0.8 * ((r as f64 * 0.7).sin() * (c as f64 * 0.4).cos()).abs();
        let s = FrameStack::from_fn(8, 6, 50, |r, c, _| frame(r, c)).unwrap();
        let out = learn_spatial_dictionary(&s, 1, SpatialMode::Online { lambda: 0.0, seed: 3 }, &[1, 5]).unwrap();
        let x = frames_to_matrix(&s, Orientation::SpaceMajor);
        let f = x.column(0);
        let a = out.w.column(0);
        let cos = a.dot(&f) / (a.dot(&a).sqrt() * f.dot(&f).sqrt());
        assert!(cos >= 0.999, "cosine {cos}");
        assert_eq!(out.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(), vec![1, 5]);
        assert_eq!(out.atoms[0].dim(), (8, 6));
    }
}
