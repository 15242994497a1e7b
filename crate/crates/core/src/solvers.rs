//! Optimization kernels shared by the offline and online learners.
//!
//! * [`eval_objective`]: `‖X − WH‖²_F + λ‖H‖₁` with the entrywise L1 norm.
//! * [`sparse_code`] / [`masked_sparse_code`]: nonnegative L1-regularized least
//!   squares per column, by cyclic coordinate descent.
//! * [`update_dictionary`]: `argmin_{W≥0} ½tr(WAWᵀ) − tr(BW)` by column-wise
//!   block coordinate descent.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{check_conform, EntryMask, NonnegMatrix};

/// Tuning for the coding and dictionary-update kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// L1 weight on the code.
    pub lambda: f64,
    /// Coordinate-descent sweeps per column, or BCD sweeps per dictionary update.
    pub max_iters: usize,
    /// Stopping threshold, relative to the problem scale.
    pub tol: f64,
    /// Atoms (or aggregate diagonals) at or below this are treated as dead.
    pub epsilon_div: f64,
    /// Scale each dictionary column to L2 norm `<= 1` after every BCD sweep.
    pub column_ball: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { lambda: 0.0, max_iters: 200, tol: 1e-8, epsilon_div: 1e-12, column_ball: false }
    }
}

impl SolverOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.epsilon_div > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon_div must be > 0, got {}",
                self.epsilon_div
            )));
        }
        Ok(())
    }
}

/// `‖X − WH‖²_F + λ Σ|H_ij|`.
pub fn eval_objective(x: &NonnegMatrix, w: &NonnegMatrix, h: &NonnegMatrix, lambda: f64) -> Result<f64> {
    check_conform("W·H", w.view(), h.view())?;
    if x.rows() != w.rows() || x.cols() != h.cols() {
        return Err(Error::shape(format!(
            "X is {}x{}, W·H is {}x{}",
            x.rows(),
            x.cols(),
            w.rows(),
            h.cols()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let residual = x.as_array() - &w.dot(h.as_array());
    let fit: f64 = residual.iter().map(|v| v * v).sum();
    Ok(fit + lambda * h.sum())
}

/// Nonnegative sparse code of every column of `x` against `w`.
///
/// Each column solves `min_{h≥0} ‖x − Wh‖² + λ‖h‖₁` independently; columns
/// are distributed over the rayon pool and the result does not depend on
/// scheduling.
pub fn sparse_code(x: &NonnegMatrix, w: &NonnegMatrix, opts: &SolverOptions) -> Result<NonnegMatrix> {
    opts.validate()?;
    check_conform("Wᵀ against X", w.t(), x.view())?;
    let gram = Gram::new(w)?;
    let c = w.t().dot(x.as_array());
    let columns: Vec<Vec<f64>> = (0..x.cols())
        .into_par_iter()
        .map(|j| gram.solve(c.column(j), opts).0)
        .collect();
    Ok(assemble_columns(w.cols(), &columns))
}

/// Result of coding a partially observed column.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedCode {
    pub code: Array1<f64>,
    /// Set when the mask observes nothing; `code` is then all zeros.
    pub no_data: bool,
}

/// Codes `x` using only its observed rows: `min_{h≥0} ‖M⊙(x − Wh)‖² + λ‖h‖₁`.
pub fn masked_sparse_code(
    x: ArrayView1<f64>,
    w: &NonnegMatrix,
    mask: &EntryMask,
    opts: &SolverOptions,
) -> Result<MaskedCode> {
    opts.validate()?;
    if x.len() != w.rows() {
        return Err(Error::shape(format!("x has {} entries, W has {} rows", x.len(), w.rows())));
    }
    mask.check_dims(x.len(), 1)?;
    let gram = Gram::new(w)?;
    Ok(masked_column(&gram, w, x, &mask.column_flags(0), opts))
}

/// Masked coding of every column of `x`; `mask` has the dimensions of `x`.
///
/// Unobserved entries of `x` are never read, so they may hold any value
/// (including negative sentinels).
pub fn masked_sparse_code_columns(
    x: ArrayView2<f64>,
    w: &NonnegMatrix,
    mask: &EntryMask,
    opts: &SolverOptions,
) -> Result<(NonnegMatrix, Vec<bool>)> {
    opts.validate()?;
    if x.nrows() != w.rows() {
        return Err(Error::shape(format!("X has {} rows, W has {} rows", x.nrows(), w.rows())));
    }
    mask.check_dims(x.nrows(), x.ncols())?;
    let gram = Gram::new(w)?;
    let coded: Vec<MaskedCode> = (0..x.ncols())
        .into_par_iter()
        .map(|j| masked_column(&gram, w, x.column(j), &mask.column_flags(j), opts))
        .collect();
    let flags = coded.iter().map(|c| c.no_data).collect();
    let columns: Vec<Vec<f64>> = coded.into_iter().map(|c| c.code.to_vec()).collect();
    Ok((assemble_columns(w.cols(), &columns), flags))
}

fn masked_column(
    full: &Gram,
    w: &NonnegMatrix,
    x: ArrayView1<f64>,
    observed: &[bool],
    opts: &SolverOptions,
) -> MaskedCode {
    let r = w.cols();
    if observed.iter().all(|&o| o) {
        let c = w.t().dot(&x);
        return MaskedCode { code: Array1::from(full.solve(c.view(), opts).0), no_data: false };
    }
    let rows: Vec<usize> = (0..observed.len()).filter(|&i| observed[i]).collect();
    if rows.is_empty() {
        return MaskedCode { code: Array1::zeros(r), no_data: true };
    }
    let w_obs = w.select(Axis(0), &rows);
    let x_obs = x.select(Axis(0), &rows);
    let gram = Gram::from_array(w_obs.t().dot(&w_obs));
    let c = w_obs.t().dot(&x_obs);
    MaskedCode { code: Array1::from(gram.solve(c.view(), opts).0), no_data: false }
}

fn assemble_columns(r: usize, columns: &[Vec<f64>]) -> NonnegMatrix {
    let mut h = Array2::zeros((r, columns.len()));
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            h[[i, j]] = v;
        }
    }
    NonnegMatrix::from_array_unchecked(h)
}

/// `WᵀW` plus the quantities coordinate descent needs from it.
struct Gram {
    g: Array2<f64>,
    scale: f64,
}

impl Gram {
    fn new(w: &NonnegMatrix) -> Result<Self> {
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateDictionary);
        }
        Ok(Self::from_array(w.t().dot(w.as_array())))
    }

    fn from_array(g: Array2<f64>) -> Self {
        // Exact symmetry lets the descent read rows instead of columns.
        let g = (&g + &g.t()) * 0.5;
        let scale = g.diag().iter().fold(0.0_f64, |m, &v| m.max(v));
        Self { g, scale }
    }

    /// Cyclic coordinate descent on `hᵀGh − 2cᵀh + λ Σh` from `h = 0`.
    ///
    /// Stops once the KKT residual is within `tol · max diag(G)`, when a sweep
    /// leaves `h` unchanged, or after `max_iters` sweeps. Returns the code and
    /// the number of sweeps taken.
    fn solve(&self, c: ArrayView1<f64>, opts: &SolverOptions) -> (Vec<f64>, usize) {
        let r = c.len();
        let mut h = vec![0.0; r];
        if self.scale <= opts.epsilon_div {
            return (h, 0);
        }
        let half_lambda = 0.5 * opts.lambda;
        let threshold = opts.tol * self.scale;
        // gh = G·h, maintained incrementally.
        let mut gh = vec![0.0; r];
        let mut previous_support: Vec<usize> = Vec::new();
        for sweep in 1..=opts.max_iters {
            let mut moved = false;
            for j in 0..r {
                let gjj = self.g[[j, j]];
                if gjj <= opts.epsilon_div {
                    continue;
                }
                let excl = gh[j] - gjj * h[j];
                let candidate = ((c[j] - excl - half_lambda) / gjj).max(0.0);
                let delta = candidate - h[j];
                if delta != 0.0 {
                    moved = true;
                    h[j] = candidate;
                    for (ghl, &glj) in gh.iter_mut().zip(self.g.row(j)) {
                        *ghl += glj * delta;
                    }
                }
            }
            if !moved || self.kkt_residual(&h, &gh, c, opts) <= threshold {
                return (h, sweep);
            }
            // Once a sweep leaves the support unchanged, head for the minimizer
            // on that face, stopping where a coordinate reaches zero and
            // retrying on the smaller face. The objective is convex along each
            // segment, so this never increases it.
            let support = self.support(&h, opts);
            if support == previous_support {
                let mut face_support = support.clone();
                while let Some(face) = self.face_minimizer(&face_support, c, half_lambda) {
                    let step = face_support
                        .iter()
                        .zip(&face)
                        .filter(|&(_, &v)| v < 0.0)
                        .map(|(&j, &v)| h[j] / (h[j] - v))
                        .fold(1.0_f64, f64::min);
                    for (&j, &v) in face_support.iter().zip(&face) {
                        let moved_to = h[j] + step * (v - h[j]);
                        h[j] = if v < 0.0 && h[j] / (h[j] - v) <= step { 0.0 } else { moved_to.max(0.0) };
                    }
                    if step >= 1.0 {
                        break;
                    }
                    face_support.retain(|&j| h[j] > 0.0);
                }
                let g_h = self.g.dot(&ArrayView1::from(&h));
                gh.copy_from_slice(g_h.as_slice().expect("contiguous"));
                if self.kkt_residual(&h, &gh, c, opts) <= threshold {
                    return (h, sweep);
                }
            }
            previous_support = support;
        }
        (h, opts.max_iters)
    }

    fn support(&self, h: &[f64], opts: &SolverOptions) -> Vec<usize> {
        (0..h.len()).filter(|&j| h[j] > 0.0 && self.g[[j, j]] > opts.epsilon_div).collect()
    }

    /// Stationary point of the objective restricted to `support` (entries in
    /// support order), or `None` if that block of the Gram is singular.
    fn face_minimizer(&self, support: &[usize], c: ArrayView1<f64>, half_lambda: f64) -> Option<Vec<f64>> {
        if support.is_empty() {
            return None;
        }
        let g_ss = self.g.select(Axis(0), support).select(Axis(1), support);
        let rhs: Vec<f64> = support.iter().map(|&j| c[j] - half_lambda).collect();
        cholesky_solve(g_ss, rhs)
    }

    fn kkt_residual(&self, h: &[f64], gh: &[f64], c: ArrayView1<f64>, opts: &SolverOptions) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..h.len() {
            if self.g[[j, j]] <= opts.epsilon_div {
                continue;
            }
            let grad = 2.0 * (gh[j] - c[j]) + opts.lambda;
            let violation = if h[j] > 0.0 { grad.abs() } else { (-grad).max(0.0) };
            worst = worst.max(violation);
        }
        worst
    }
}

/// Solves `G x = rhs` for symmetric positive definite `G`; `None` if `G` is
/// numerically singular.
fn cholesky_solve(mut g: Array2<f64>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    let floor = 1e-12 * g.diag().iter().fold(0.0_f64, |m, &v| m.max(v));
    for j in 0..n {
        let mut diag = g[[j, j]];
        for k in 0..j {
            diag -= g[[j, k]] * g[[j, k]];
        }
        if !(diag > floor) {
            return None;
        }
        let diag = diag.sqrt();
        g[[j, j]] = diag;
        for i in (j + 1)..n {
            let mut v = g[[i, j]];
            for k in 0..j {
                v -= g[[i, k]] * g[[j, k]];
            }
            g[[i, j]] = v / diag;
        }
    }
    for i in 0..n {
        let mut v = rhs[i];
        for k in 0..i {
            v -= g[[i, k]] * rhs[k];
        }
        rhs[i] = v / g[[i, i]];
    }
    for i in (0..n).rev() {
        let mut v = rhs[i];
        for k in (i + 1)..n {
            v -= g[[k, i]] * rhs[k];
        }
        rhs[i] = v / g[[i, i]];
    }
    Some(rhs)
}

/// Outcome of a dictionary update, with the surrogate value before the first
/// sweep and after each sweep.
#[derive(Debug, Clone)]
pub struct DictionaryUpdate {
    pub w: NonnegMatrix,
    pub surrogate_trace: Vec<f64>,
    pub sweeps: usize,
}

/// `½tr(WAWᵀ) − tr(BW)` for `W: d×r`, `A: r×r`, `B: r×d`.
pub fn surrogate(w: ArrayView2<f64>, a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let wa = w.dot(&a);
    let quad: f64 = wa.iter().zip(w.iter()).map(|(p, q)| p * q).sum();
    let lin: f64 = b.t().iter().zip(w.iter()).map(|(p, q)| p * q).sum();
    0.5 * quad - lin
}

/// Minimizes the online surrogate over nonnegative dictionaries.
///
/// `a` and `b` are taken as real matrices; the online learner always passes
/// nonnegative aggregates.
pub fn update_dictionary(
    w_prev: &NonnegMatrix,
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    opts: &SolverOptions,
) -> Result<NonnegMatrix> {
    Ok(update_dictionary_traced(w_prev, a, b, opts)?.w)
}

pub fn update_dictionary_traced(
    w_prev: &NonnegMatrix,
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    opts: &SolverOptions,
) -> Result<DictionaryUpdate> {
    opts.validate()?;
    let (d, r) = w_prev.dim();
    if a.dim() != (r, r) || b.dim() != (r, d) {
        return Err(Error::shape(format!(
            "W is {d}x{r}; A must be {r}x{r} (got {}x{}), B must be {r}x{d} (got {}x{})",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    check_symmetric(a)?;

    // Work on Wᵀ so each dictionary column is a contiguous row.
    let mut wt = w_prev.t().as_standard_layout().into_owned();
    let b_scale = 1.0 + b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut trace = vec![surrogate(wt.t(), a, b)];
    let mut sweeps = 0;
    let mut wa_j = Array1::<f64>::zeros(d);
    while sweeps < opts.max_iters {
        sweeps += 1;
        let mut largest_step = 0.0_f64;
        for j in 0..r {
            let ajj = a[[j, j]];
            if ajj <= opts.epsilon_div {
                continue;
            }
            wa_j.fill(0.0);
            for (l, row) in wt.rows().into_iter().enumerate() {
                let alj = a[[l, j]];
                if alj != 0.0 {
                    wa_j.scaled_add(alj, &row);
                }
            }
            let mut col = wt.row_mut(j);
            for ((w_ij, &b_ji), &wa_ij) in col.iter_mut().zip(b.row(j)).zip(&wa_j) {
                let new = (*w_ij + (b_ji - wa_ij) / ajj).max(0.0);
                largest_step = largest_step.max(ajj * (new - *w_ij).abs());
                *w_ij = new;
            }
        }
        if opts.column_ball {
            for mut col in wt.rows_mut() {
                let norm = col.dot(&col).sqrt();
                if norm > 1.0 {
                    col.mapv_inplace(|v| v / norm);
                }
            }
        }
        trace.push(surrogate(wt.t(), a, b));
        if largest_step <= opts.tol * b_scale {
            break;
        }
    }
    let w = wt.t().as_standard_layout().into_owned();
    Ok(DictionaryUpdate { w: NonnegMatrix::from_clamped(w), surrogate_trace: trace, sweeps })
}

/// Scales every column with L2 norm above one back onto the unit sphere.
pub fn project_columns_to_ball(w: &mut Array2<f64>) {
    for mut col in w.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm > 1.0 {
            col.mapv_inplace(|v| v / norm);
        }
    }
}

fn check_symmetric(a: ArrayView2<f64>) -> Result<()> {
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-8 * scale {
                return Err(Error::InvalidAggregate(format!(
                    "A is not symmetric at ({i}, {j}): {} vs {}",
                    a[[i, j]],
                    a[[j, i]]
                )));
            }
        }
    }
    Ok(())
}
