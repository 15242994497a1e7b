//! Offline NMF by Lee–Seung multiplicative updates.

use crate::error::{Error, Result};
use crate::matrix::{check_conform, NonnegMatrix};
use crate::rng;

pub const DEFAULT_EPSILON_DIV: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct NmfFitResult {
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
    /// `‖X − WH‖²_F` after each step.
    pub objective_trace: Vec<f64>,
    /// `r > min(d, n)`: the fit is allowed but the factorization is overcomplete.
    pub overcomplete: bool,
}

/// One multiplicative step: the code first, then the dictionary using the new code.
///
/// `H ← H ⊙ WᵀX / WᵀWH`, then `W ← W ⊙ XHᵀ / WHHᵀ`, each denominator floored
/// at `epsilon_div`.
pub fn multiplicative_step(
    x: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    epsilon_div: f64,
) -> Result<(NonnegMatrix, NonnegMatrix)> {
    check_shapes(x, w, h)?;
    if !(epsilon_div > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon_div must be > 0, got {epsilon_div}")));
    }
    let (w, h) = (w.as_array(), h.as_array());

    let numer = w.t().dot(x.as_array());
    let denom = w.t().dot(w).dot(h);
    let mut h_next = h.clone();
    ndarray::Zip::from(&mut h_next)
        .and(&numer)
        .and(&denom)
        .for_each(|v, &n, &d| *v *= n / d.max(epsilon_div));

    let numer = x.dot(&h_next.t());
    let denom = w.dot(&h_next.dot(&h_next.t()));
    let mut w_next = w.clone();
    ndarray::Zip::from(&mut w_next)
        .and(&numer)
        .and(&denom)
        .for_each(|v, &n, &d| *v *= n / d.max(epsilon_div));

    Ok((NonnegMatrix::from_clamped(w_next), NonnegMatrix::from_clamped(h_next)))
}

/// Fits `X ≈ WH` with rank `r` from a seeded uniform `[0, 1)` start.
pub fn fit_nmf(x: &NonnegMatrix, r: usize, iters: usize, seed: u64) -> Result<NmfFitResult> {
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let mut gen = rng::seeded(seed, rng::STREAM_NMF_INIT);
    let w0 = NonnegMatrix::from_array_unchecked(rng::uniform_matrix(&mut gen, x.rows(), r));
    let h0 = NonnegMatrix::from_array_unchecked(rng::uniform_matrix(&mut gen, r, x.cols()));
    fit_nmf_from(x, w0, h0, iters, DEFAULT_EPSILON_DIV)
}

/// Runs `iters` multiplicative steps from the given factors.
pub fn fit_nmf_from(
    x: &NonnegMatrix,
    w0: NonnegMatrix,
    h0: NonnegMatrix,
    iters: usize,
    epsilon_div: f64,
) -> Result<NmfFitResult> {
    check_shapes(x, &w0, &h0)?;
    let r = w0.cols();
    let overcomplete = r > x.rows().min(x.cols());
    let (mut w, mut h) = (w0, h0);
    let mut objective_trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        (w, h) = multiplicative_step(x, &w, &h, epsilon_div)?;
        objective_trace.push(residual_sq(x, &w, &h));
    }
    Ok(NmfFitResult { w, h, objective_trace, overcomplete })
}

/// `‖X − WH‖²_F`.
pub fn residual_sq(x: &NonnegMatrix, w: &NonnegMatrix, h: &NonnegMatrix) -> f64 {
    let wh = w.dot(h.as_array());
    x.iter().zip(wh.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_shapes(x: &NonnegMatrix, w: &NonnegMatrix, h: &NonnegMatrix) -> Result<()> {
    check_conform("W·H", w.view(), h.view())?;
    if x.rows() != w.rows() || x.cols() != h.cols() {
        return Err(Error::shape(format!(
            "X is {}x{} but W·H is {}x{}",
            x.rows(),
            x.cols(),
            w.rows(),
            h.cols()
        )));
    }
    Ok(())
}
