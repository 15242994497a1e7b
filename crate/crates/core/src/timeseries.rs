//! Temporal dictionary learning for an ensemble of aligned scalar series.
//!
//! At tick `t` every series contributes its last `N` values; each buffer is
//! turned into a `k × (N−k+1)` Hankel block (column `j` holds the `k`
//! consecutive values starting at offset `j`) and the blocks are stacked
//! vertically, series 0 on top. The online learner then sees one
//! `m·k × (N−k+1)` sample per tick, so its atoms are joint `k`-step motifs
//! across all series.
//!
//! Missing observations never enter a code: every window is coded against
//! the observed rows only, and the same codes fill in the gaps.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::matrix::{EntryMask, NonnegMatrix};
use crate::online::{OnlineDictionaryState, OnlineOptions};
use crate::solvers::{self, SolverOptions};

/// `m` aligned series of length `T` with observation flags and a
/// nonnegativity offset.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEnsemble {
    values: Array2<f64>,
    observed: Vec<bool>,
    offset: f64,
}

impl SeriesEnsemble {
    /// `values` is `m × T`; `observed` is row-major over the same shape.
    /// Unobserved values are ignored and may hold anything finite.
    pub fn new(values: Array2<f64>, observed: Vec<bool>, offset: f64) -> Result<Self> {
        let (m, len) = values.dim();
        if m == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one series".into()));
        }
        if observed.len() != m * len {
            return Err(Error::shape(format!("{m}x{len} ensemble needs {} flags", m * len)));
        }
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::InvalidArgument(format!("offset must be >= 0, got {offset}")));
        }
        for ((i, t), &v) in values.indexed_iter() {
            if observed[i * len + t] && !(v + offset >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "series {i} at t={t}: {v} + offset {offset} is negative"
                )));
            }
        }
        Ok(Self { values, observed, offset })
    }

    /// Builds an ensemble from optional samples, with the smallest offset that
    /// makes every observed value nonnegative.
    pub fn from_options(series: &[Vec<Option<f64>>]) -> Result<Self> {
        let m = series.len();
        let len = series.first().map_or(0, Vec::len);
        if series.iter().any(|s| s.len() != len) {
            return Err(Error::shape("series have different lengths"));
        }
        let mut values = Array2::zeros((m, len));
        let mut observed = vec![false; m * len];
        for (i, s) in series.iter().enumerate() {
            for (t, v) in s.iter().enumerate() {
                if let Some(v) = v {
                    values[[i, t]] = *v;
                    observed[i * len + t] = true;
                }
            }
        }
        let offset = default_offset(&values, &observed);
        Self::new(values, observed, offset)
    }

    pub fn series_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Replaces the offset, keeping the nonnegativity invariant.
    pub fn with_offset(self, offset: f64) -> Result<Self> {
        Self::new(self.values, self.observed, offset)
    }

    /// Raw value in caller units; meaningful only where observed.
    pub fn value(&self, series: usize, t: usize) -> f64 {
        self.values[[series, t]]
    }

    /// Value plus offset.
    pub fn shifted(&self, series: usize, t: usize) -> f64 {
        self.values[[series, t]] + self.offset
    }

    pub fn is_observed(&self, series: usize, t: usize) -> bool {
        self.observed[series * self.len() + t]
    }

    /// Stacked `m·k × cols` window whose last column ends at tick `end`,
    /// with column `j` starting at `end − (cols − 1) − (k − 1) + j`. Missing
    /// entries are zero in the matrix and false in the mask.
    fn window(&self, end: usize, k: usize, cols: usize) -> (Array2<f64>, EntryMask) {
        let m = self.series_count();
        let start = end + 1 - (cols - 1) - k;
        let mut x = Array2::zeros((m * k, cols));
        let mut flags = vec![false; m * k * cols];
        for i in 0..m {
            for row in 0..k {
                for j in 0..cols {
                    let t = start + row + j;
                    if self.is_observed(i, t) {
                        x[[i * k + row, j]] = self.shifted(i, t);
                        flags[(i * k + row) * cols + j] = true;
                    }
                }
            }
        }
        let mask = EntryMask::from_row_major(m * k, cols, flags).expect("window mask dims");
        (x, mask)
    }
}

/// `max(0, −min observed value)`.
pub fn default_offset(values: &Array2<f64>, observed: &[bool]) -> f64 {
    let min = values
        .iter()
        .zip(observed)
        .filter(|(_, &o)| o)
        .fold(f64::INFINITY, |m, (&v, _)| m.min(v));
    if min.is_finite() { (-min).max(0.0) } else { 0.0 }
}

/// Window length `k`, buffer length `n` and atom count `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HankelSpec {
    pub k: usize,
    pub n: usize,
    pub r: usize,
}

impl HankelSpec {
    pub fn new(k: usize, n: usize, r: usize) -> Result<Self> {
        let spec = Self { k, n, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::InvalidArgument(format!("need 1 <= k <= N, got k={}, N={}", self.k, self.n)));
        }
        if self.r == 0 {
            return Err(Error::InvalidArgument("r must be at least 1".into()));
        }
        Ok(())
    }

    /// Columns per Hankel block, `N − k + 1`.
    pub fn columns(&self) -> usize {
        self.n - self.k + 1
    }
}

/// `k × (N−k+1)` matrix with entry `(i, j) = buffer[i + j]`.
pub fn hankelize(buffer: &[f64], k: usize) -> Result<NonnegMatrix> {
    let n = buffer.len();
    if k == 0 || k > n {
        return Err(Error::shape(format!("window length {k} does not fit a buffer of {n}")));
    }
    NonnegMatrix::new(Array2::from_shape_fn((k, n - k + 1), |(i, j)| buffer[i + j]))
}

/// Stacks equally shaped blocks vertically; block `i` occupies rows `[i·k, (i+1)·k)`.
pub fn stack_ensemble(blocks: &[NonnegMatrix]) -> Result<NonnegMatrix> {
    let first = blocks.first().ok_or_else(|| Error::shape("nothing to stack"))?;
    let (k, c) = first.dim();
    if let Some(bad) = blocks.iter().position(|b| b.dim() != (k, c)) {
        return Err(Error::shape(format!(
            "block {bad} is {}x{}, expected {k}x{c}",
            blocks[bad].rows(),
            blocks[bad].cols()
        )));
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let stacked = ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| Error::shape(e.to_string()))?;
    Ok(NonnegMatrix::from_array_unchecked(stacked))
}

/// Dictionary `W_t` as it stood right after the step at tick `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: usize,
    pub w: NonnegMatrix,
}

#[derive(Debug, Clone)]
pub struct TemporalConfig {
    pub spec: HankelSpec,
    pub lambda: f64,
    pub seed: u64,
    /// Ticks between online steps once the buffer is full.
    pub stride: usize,
    pub options: OnlineOptions,
}

impl TemporalConfig {
    pub fn new(spec: HankelSpec, lambda: f64, seed: u64) -> Self {
        Self { spec, lambda, seed, stride: 1, options: OnlineOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct TemporalFit {
    pub snapshots: Vec<Snapshot>,
    pub state: OnlineDictionaryState,
}

/// Keep every snapshot up to 1000 ticks, otherwise every `⌈T/1000⌉`-th.
pub fn snapshot_every(len: usize) -> usize {
    if len <= 1000 { 1 } else { len.div_ceil(1000) }
}

/// Online temporal dictionary learning over the whole ensemble.
///
/// Steps at every `stride`-th tick from `N − 1` on; the final tick always
/// yields a snapshot.
pub fn online_temporal_fit(ensemble: &SeriesEnsemble, config: &TemporalConfig) -> Result<TemporalFit> {
    let spec = config.spec;
    spec.validate()?;
    if config.stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let len = ensemble.len();
    if len < spec.n {
        return Err(Error::InsufficientData(format!(
            "series length {len} is shorter than the buffer length N={}",
            spec.n
        )));
    }
    let d = ensemble.series_count() * spec.k;
    let mut state = OnlineDictionaryState::init(d, spec.r, config.lambda, config.seed)?;
    let every = snapshot_every(len);
    let mut snapshots = Vec::new();
    let ticks: Vec<usize> = (spec.n - 1..len).step_by(config.stride).collect();
    for (idx, &t) in ticks.iter().enumerate() {
        let (x, mask) = ensemble.window(t, spec.k, spec.columns());
        state.step_masked(x.view(), &mask, &config.options)?;
        if idx % every == 0 || idx + 1 == ticks.len() {
            snapshots.push(Snapshot { t, w: state.dictionary().clone() });
        }
    }
    Ok(TemporalFit { snapshots, state })
}

fn snapshot_at(snapshots: &[Snapshot], t: usize) -> Option<&Snapshot> {
    let idx = snapshots.partition_point(|s| s.t <= t);
    if idx == 0 { snapshots.first() } else { Some(&snapshots[idx - 1]) }
}

fn coding_options(lambda: f64) -> SolverOptions {
    OnlineOptions::default().coding(lambda)
}

/// Rolling reconstruction in the shifted (nonnegative) scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// `m × T`; `None` before the first snapshot tick.
    pub values: Vec<Vec<Option<f64>>>,
    /// Ticks whose window had no observed entry; their values are 0.
    pub no_data: Vec<bool>,
}

/// For each tick `t` from the first snapshot on, codes the stacked `k`-step
/// window ending at `t` against the latest `W_s` with `s ≤ t` (observed
/// entries only) and keeps the time-`t` coordinate of `W_s·h` per series.
pub fn rolling_reconstruct(
    ensemble: &SeriesEnsemble,
    snapshots: &[Snapshot],
    spec: &HankelSpec,
    lambda: f64,
) -> Result<Reconstruction> {
    spec.validate()?;
    let (m, len, k) = (ensemble.series_count(), ensemble.len(), spec.k);
    check_snapshots(snapshots, m * k, spec.r)?;
    let mut values = vec![vec![None; len]; m];
    let mut no_data = vec![false; len];
    let Some(first) = snapshots.first() else {
        return Ok(Reconstruction { values, no_data });
    };
    let opts = coding_options(lambda);
    for t in first.t.max(k - 1)..len {
        let w = &snapshot_at(snapshots, t).expect("nonempty").w;
        let (x, mask) = ensemble.window(t, k, 1);
        let coded = solvers::masked_sparse_code(x.column(0), w, &mask, &opts)?;
        no_data[t] = coded.no_data;
        let fitted = w.dot(&coded.code);
        for (i, series) in values.iter_mut().enumerate() {
            series[t] = Some(fitted[i * k + k - 1]);
        }
    }
    Ok(Reconstruction { values, no_data })
}

/// A window with its gaps filled from the dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct Inpainted {
    pub values: Array1<f64>,
    /// No entry was observed; missing entries were filled with 0.
    pub no_data: bool,
}

/// Codes `v` on its observed entries, copies those entries verbatim and fills
/// the rest from `W·h`.
pub fn inpaint_window(w: &NonnegMatrix, v: ArrayView1<f64>, mask: &EntryMask, lambda: f64) -> Result<Inpainted> {
    let coded = solvers::masked_sparse_code(v, w, mask, &coding_options(lambda))?;
    let fitted = w.dot(&coded.code);
    let values = Array1::from_shape_fn(v.len(), |i| if mask.is_observed(i, 0) { v[i] } else { fitted[i] });
    Ok(Inpainted { values, no_data: coded.no_data })
}

/// Ensemble with every missing entry filled, in the shifted scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FilledEnsemble {
    /// `m × T`: observed values verbatim, gaps from the dictionary.
    pub values: Array2<f64>,
    /// Row-major flags marking filled entries.
    pub filled: Vec<bool>,
    /// Ticks whose window observed nothing.
    pub no_data: Vec<bool>,
}

/// Fills every missing entry `(i, t)` from the window ending at `t` (or at
/// `k − 1` for the first few ticks) coded against the latest dictionary
/// snapshot available at that tick.
pub fn inpaint_ensemble(
    ensemble: &SeriesEnsemble,
    snapshots: &[Snapshot],
    spec: &HankelSpec,
    lambda: f64,
) -> Result<FilledEnsemble> {
    spec.validate()?;
    let (m, len, k) = (ensemble.series_count(), ensemble.len(), spec.k);
    check_snapshots(snapshots, m * k, spec.r)?;
    if len < k {
        return Err(Error::InsufficientData(format!("series length {len} is shorter than k={k}")));
    }
    let mut values = Array2::zeros((m, len));
    let mut filled = vec![false; m * len];
    let mut no_data = vec![false; len];
    for t in 0..len {
        let missing: Vec<usize> = (0..m).filter(|&i| !ensemble.is_observed(i, t)).collect();
        for i in 0..m {
            if ensemble.is_observed(i, t) {
                values[[i, t]] = ensemble.shifted(i, t);
            }
        }
        if missing.is_empty() {
            continue;
        }
        let end = t.max(k - 1);
        let row = k - 1 - (end - t);
        let snapshot = snapshot_at(snapshots, end)
            .ok_or_else(|| Error::InsufficientData("no dictionary snapshot to fill gaps from".into()))?;
        let (x, mask) = ensemble.window(end, k, 1);
        let out = inpaint_window(&snapshot.w, x.column(0), &mask, lambda)?;
        no_data[t] = out.no_data;
        for i in missing {
            values[[i, t]] = out.values[i * k + row];
            filled[i * len + t] = true;
        }
    }
    Ok(FilledEnsemble { values, filled, no_data })
}

fn check_snapshots(snapshots: &[Snapshot], d: usize, r: usize) -> Result<()> {
    if let Some(bad) = snapshots.iter().find(|s| s.w.dim() != (d, r)) {
        return Err(Error::shape(format!(
            "snapshot at t={} is {}x{}, expected {d}x{r}",
            bad.t,
            bad.w.rows(),
            bad.w.cols()
        )));
    }
    if snapshots.windows(2).any(|p| p[0].t >= p[1].t) {
        return Err(Error::InvalidArgument("snapshots must be in increasing tick order".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hankel_examples() {
        let h = hankelize(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert_eq!(h.as_array(), &array![[1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 5.0]]);
        let h = hankelize(&[1.0, 2.0, 3.0], 3).unwrap();
        assert_eq!(h.as_array(), &array![[1.0], [2.0], [3.0]]);
        let h = hankelize(&[1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(h.as_array(), &array![[1.0, 2.0, 3.0]]);
        assert!(matches!(hankelize(&[1.0], 2), Err(Error::Shape(_))));
        assert!(hankelize(&[-1.0, 1.0], 1).is_err());
    }

    #[test]
    fn stacking() {
        let a = NonnegMatrix::new(array![[1.0, 2.0]]).unwrap();
        let b = NonnegMatrix::new(array![[3.0, 4.0]]).unwrap();
        assert_eq!(stack_ensemble(&[a.clone()]).unwrap(), a);
        assert_eq!(stack_ensemble(&[a.clone(), b]).unwrap().as_array(), &array![[1.0, 2.0], [3.0, 4.0]]);
        let ragged = NonnegMatrix::zeros(1, 3);
        assert!(matches!(stack_ensemble(&[a, ragged]), Err(Error::Shape(_))));
        assert!(stack_ensemble(&[]).is_err());
    }

    #[test]
    fn window_matches_stacked_hankel_blocks() {
        let a: Vec<Option<f64>> = (0..10).map(|t| Some(t as f64)).collect();
        let b: Vec<Option<f64>> = (0..10).map(|t| Some(100.0 + t as f64)).collect();
        let e = SeriesEnsemble::from_options(&[a, b]).unwrap();
        let spec = HankelSpec::new(3, 6, 2).unwrap();
        let (x, mask) = e.window(8, spec.k, spec.columns());
        let buf_a: Vec<f64> = (3..9).map(|t| t as f64).collect();
        let buf_b: Vec<f64> = (3..9).map(|t| 100.0 + t as f64).collect();
        let expected = stack_ensemble(&[hankelize(&buf_a, 3).unwrap(), hankelize(&buf_b, 3).unwrap()]).unwrap();
        assert_eq!(&x, expected.as_array());
        assert!(mask.is_full());
    }

    #[test]
    fn offset_defaults_to_minimal_shift() {
        let e = SeriesEnsemble::from_options(&[vec![Some(-3.0), None, Some(2.0)]]).unwrap();
        assert_eq!(e.offset(), 3.0);
        assert_eq!(e.shifted(0, 0), 0.0);
        assert!(!e.is_observed(0, 1));
        let e = SeriesEnsemble::from_options(&[vec![Some(1.0)]]).unwrap();
        assert_eq!(e.offset(), 0.0);
        assert!(SeriesEnsemble::new(array![[-1.0]], vec![true], 0.5).is_err());
        assert!(SeriesEnsemble::new(array![[-100.0]], vec![false], 0.0).is_ok());
    }

    #[test]
    fn too_short_is_insufficient() {
        let e = SeriesEnsemble::from_options(&[vec![Some(1.0); 10]]).unwrap();
        let cfg = TemporalConfig::new(HankelSpec::new(2, 20, 1).unwrap(), 0.0, 0);
        assert!(matches!(online_temporal_fit(&e, &cfg), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn inpaint_examples() {
        let w = NonnegMatrix::new(array![[1.0], [1.0]]).unwrap();
        let v = array![2.0, -100.0];
        let out = inpaint_window(&w, v.view(), &EntryMask::column(vec![true, false]), 0.0).unwrap();
        assert_eq!(out.values, array![2.0, 2.0]);
        let v = array![2.0, 3.0];
        let out = inpaint_window(&w, v.view(), &EntryMask::column(vec![true, true]), 0.0).unwrap();
        assert_eq!(out.values, v);
        let out = inpaint_window(&w, v.view(), &EntryMask::column(vec![false, false]), 0.0).unwrap();
        assert!(out.no_data);
        assert_eq!(out.values, array![0.0, 0.0]);
    }

    #[test]
    fn snapshot_cadence() {
        assert_eq!(snapshot_every(300), 1);
        assert_eq!(snapshot_every(1000), 1);
        assert_eq!(snapshot_every(1001), 2);
        assert_eq!(snapshot_every(5000), 5);
    }

    #[test]
    fn constant_ensemble_learns_flat_atom() {
        let series = vec![vec![Some(3.0); 120]; 2];
        let e = SeriesEnsemble::from_options(&series).unwrap();
        let cfg = TemporalConfig::new(HankelSpec::new(4, 20, 1).unwrap(), 0.0, 5);
        let fit = online_temporal_fit(&e, &cfg).unwrap();
        assert_eq!(fit.state.samples_seen(), 101);
        let atom = fit.state.dictionary().column(0).to_owned();
        let max = atom.iter().fold(0.0_f64, |m, &v| m.max(v));
        let min = atom.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        assert!(max / min <= 1.0 + 1e-3, "atom {atom}");
    }

    #[test]
    fn periodic_motif_is_reconstructed() {
        let k = 4;
        let motif = [1.0, 3.0, 2.0, 0.5];
        let series: Vec<Option<f64>> = (0..260).map(|t| Some(motif[t % k])).collect();
        let e = SeriesEnsemble::from_options(&[series]).unwrap();
        let spec = HankelSpec::new(k, 16, k).unwrap();
        let fit = online_temporal_fit(&e, &TemporalConfig::new(spec, 0.0, 2)).unwrap();
        let rec = rolling_reconstruct(&e, &fit.snapshots, &spec, 0.0).unwrap();
        let (mut err, mut norm) = (0.0, 0.0);
        for t in 215..260 {
            let v = rec.values[0][t].unwrap();
            err += (v - e.shifted(0, t)).powi(2);
            norm += e.shifted(0, t).powi(2);
        }
        let rel = (err / norm).sqrt();
        assert!(rel <= 1e-2, "relative residual {rel}");
        assert!(rec.values[0][..15].iter().all(Option::is_none));
    }

    #[test]
    fn changing_hidden_values_does_not_change_fill() {
        let w = NonnegMatrix::new(array![[1.0, 0.2], [0.5, 1.0], [0.3, 0.7]]).unwrap();
        let mask = EntryMask::column(vec![true, false, true]);
        let a = inpaint_window(&w, array![0.8, 0.0, 0.4].view(), &mask, 0.05).unwrap();
        let b = inpaint_window(&w, array![0.8, 99.0, 0.4].view(), &mask, 0.05).unwrap();
        assert_eq!(a, b);
    }
}
