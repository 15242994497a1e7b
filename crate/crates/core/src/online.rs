//! Online NMF: the streaming state `(W, A, B, t, λ)` and its per-sample step.
//!
//! For each incoming batch `X_t` the learner codes it against the previous
//! dictionary, folds the code into the running averages
//!
//! ```text
//! A_t = ((t−1)·A_{t−1} + H_t·H_tᵀ) / t
//! B_t = ((t−1)·B_{t−1} + H_t·X_tᵀ) / t
//! ```
//!
//! and re-solves the dictionary against the quadratic surrogate built from
//! `A_t` and `B_t`. Nothing else about the past stream is kept.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::matrix::{EntryMask, NonnegMatrix};
use crate::rng;
use crate::solvers::{self, SolverOptions};

/// Kernel settings for [`OnlineDictionaryState::step_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineOptions {
    pub code_iters: usize,
    pub dictionary_sweeps: usize,
    pub tol: f64,
    pub epsilon_div: f64,
    /// Keep dictionary columns inside the unit L2 ball.
    pub column_ball: bool,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        Self { code_iters: 200, dictionary_sweeps: 50, tol: 1e-8, epsilon_div: 1e-12, column_ball: true }
    }
}

impl OnlineOptions {
    pub fn coding(&self, lambda: f64) -> SolverOptions {
        SolverOptions {
            lambda,
            max_iters: self.code_iters,
            tol: self.tol,
            epsilon_div: self.epsilon_div,
            column_ball: false,
        }
    }

    pub fn dictionary(&self) -> SolverOptions {
        SolverOptions {
            lambda: 0.0,
            max_iters: self.dictionary_sweeps,
            tol: self.tol,
            epsilon_div: self.epsilon_div,
            column_ball: self.column_ball,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineDictionaryState {
    w: NonnegMatrix,
    a: NonnegMatrix,
    b: NonnegMatrix,
    t: u64,
    lambda: f64,
}

impl OnlineDictionaryState {
    /// Fresh state with a seeded random dictionary whose columns have unit L2 norm.
    pub fn init(d: usize, r: usize, lambda: f64, seed: u64) -> Result<Self> {
        if d == 0 || r == 0 {
            return Err(Error::InvalidArgument(format!("need d, r >= 1, got d={d}, r={r}")));
        }
        let mut gen = rng::seeded(seed, rng::STREAM_ONLINE_INIT);
        let mut w = rng::uniform_matrix(&mut gen, d, r);
        for mut col in w.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm > 0.0 {
                col.mapv_inplace(|v| v / norm);
            } else {
                col.fill(1.0 / (d as f64).sqrt());
            }
        }
        Self::with_dictionary(NonnegMatrix::from_array_unchecked(w), lambda)
    }

    /// Fresh state (`t = 0`, zero aggregates) around a given dictionary.
    pub fn with_dictionary(w: NonnegMatrix, lambda: f64) -> Result<Self> {
        let (d, r) = w.dim();
        Self::from_parts(w, NonnegMatrix::zeros(r, r), NonnegMatrix::zeros(r, d), 0, lambda)
    }

    /// Reassembles a state, checking shapes, symmetry of `A` and the `t = 0` rule.
    pub fn from_parts(w: NonnegMatrix, a: NonnegMatrix, b: NonnegMatrix, t: u64, lambda: f64) -> Result<Self> {
        let (d, r) = w.dim();
        if d == 0 || r == 0 {
            return Err(Error::InvalidArgument("dictionary must be at least 1x1".into()));
        }
        if a.dim() != (r, r) || b.dim() != (r, d) {
            return Err(Error::shape(format!(
                "W is {d}x{r} but A is {}x{} and B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        if t == 0 && (a.iter().any(|&v| v != 0.0) || b.iter().any(|&v| v != 0.0)) {
            return Err(Error::InvalidAggregate("t = 0 requires zero aggregates".into()));
        }
        let scale = a.iter().fold(0.0_f64, |m, &v| m.max(v));
        for i in 0..r {
            for j in (i + 1)..r {
                if (a[[i, j]] - a[[j, i]]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidAggregate(format!("A is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { w, a, b, t, lambda })
    }

    pub fn dictionary(&self) -> &NonnegMatrix {
        &self.w
    }

    pub fn aggregate_a(&self) -> &NonnegMatrix {
        &self.a
    }

    pub fn aggregate_b(&self) -> &NonnegMatrix {
        &self.b
    }

    pub fn samples_seen(&self) -> u64 {
        self.t
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn atoms(&self) -> usize {
        self.w.cols()
    }

    /// One step with default kernel settings. Returns the code `H_t`.
    pub fn step(&mut self, x: &NonnegMatrix) -> Result<NonnegMatrix> {
        self.step_with(x, &OnlineOptions::default())
    }

    pub fn step_with(&mut self, x: &NonnegMatrix, opts: &OnlineOptions) -> Result<NonnegMatrix> {
        self.check_rows(x.rows())?;
        let h = solvers::sparse_code(x, &self.w, &opts.coding(self.lambda))?;
        self.absorb(&h, x.view(), opts)?;
        Ok(h)
    }

    /// Step on a partially observed batch.
    ///
    /// Codes use only observed entries. For the `B` aggregate, missing
    /// entries are replaced by the reconstruction `W_{t−1}·h` so that the
    /// placeholder values in `x` never reach the dictionary.
    pub fn step_masked(&mut self, x: ArrayView2<f64>, mask: &EntryMask, opts: &OnlineOptions) -> Result<NonnegMatrix> {
        self.check_rows(x.nrows())?;
        let (h, _) = solvers::masked_sparse_code_columns(x, &self.w, mask, &opts.coding(self.lambda))?;
        if mask.is_full() {
            self.absorb(&h, x, opts)?;
            return Ok(h);
        }
        let fitted = self.w.dot(h.as_array());
        let mut filled = x.to_owned();
        for ((i, j), v) in filled.indexed_iter_mut() {
            if !mask.is_observed(i, j) {
                *v = fitted[[i, j]];
            }
        }
        let filled = NonnegMatrix::new(filled)?;
        self.absorb(&h, filled.view(), opts)?;
        Ok(h)
    }

    fn absorb(&mut self, h: &NonnegMatrix, x: ArrayView2<f64>, opts: &OnlineOptions) -> Result<()> {
        self.t += 1;
        let t = self.t as f64;
        let keep = (t - 1.0) / t;
        let hht = h.dot(&h.t());
        let hxt = h.dot(&x.t());
        let a = self.a.as_array() * keep + &(hht / t);
        let b = self.b.as_array() * keep + &(hxt / t);
        // HHᵀ is symmetric in exact arithmetic; pin it so rounding never trips the check.
        let a = symmetrize(a);
        self.a = NonnegMatrix::from_clamped(a);
        self.b = NonnegMatrix::from_clamped(b);
        self.w = solvers::update_dictionary(&self.w, self.a.view(), self.b.view(), &opts.dictionary())?;
        Ok(())
    }

    /// Codes `x` against the current dictionary.
    pub fn code(&self, x: &NonnegMatrix) -> Result<NonnegMatrix> {
        self.check_rows(x.rows())?;
        solvers::sparse_code(x, &self.w, &OnlineOptions::default().coding(self.lambda))
    }

    /// `W · sparse_code(x, W, λ)`.
    pub fn reconstruct(&self, x: &NonnegMatrix) -> Result<NonnegMatrix> {
        let h = self.code(x)?;
        Ok(NonnegMatrix::from_clamped(self.w.dot(h.as_array())))
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.w.rows() {
            return Err(Error::shape(format!("sample has {rows} rows, dictionary has {}", self.w.rows())));
        }
        Ok(())
    }
}

fn symmetrize(mut a: Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
    a
}
