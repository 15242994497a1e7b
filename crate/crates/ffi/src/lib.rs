//! C ABI for online nonnegative dictionary learning.
//!
//! Matrices cross the boundary as row-major `double` buffers whose shape is
//! passed alongside. Every fallible call returns an [`OnmfStatus`]; the text of
//! the most recent failure on the calling thread is available from
//! [`onmf_last_error`]. Panics are caught and reported as
//! [`OnmfStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use onmf::{io::persist, nmf, solvers, Error, NonnegMatrix, OnlineDictionaryState, SolverOptions};

/// Status codes; values 1–4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnmfStatus {
    Ok = 0,
    Io = 1,
    InvalidArgument = 2,
    InsufficientData = 3,
    Format = 4,
    NullPointer = 5,
    Internal = 6,
}

/// Opaque online learner: dictionary, aggregates, sample count and λ.
pub struct OnmfState {
    inner: OnlineDictionaryState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> OnmfStatus {
    match panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => OnmfStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            OnmfStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            match e.exit_code() {
                1 => OnmfStatus::Io,
                2 => OnmfStatus::InvalidArgument,
                3 => OnmfStatus::InsufficientData,
                _ => OnmfStatus::Format,
            }
        }
        Err(_) => {
            set_error("internal panic".into());
            OnmfStatus::Internal
        }
    }
}

fn len_of(rows: usize, cols: usize) -> Result<usize, Failure> {
    rows.checked_mul(cols).ok_or_else(|| Error::InvalidArgument(format!("{rows}x{cols} overflows")).into())
}

/// # Safety
/// `data` must be valid for `rows * cols` reads.
unsafe fn matrix_in(data: *const f64, rows: usize, cols: usize, what: &'static str) -> Result<NonnegMatrix, Failure> {
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    let values = std::slice::from_raw_parts(data, len_of(rows, cols)?).to_vec();
    Ok(NonnegMatrix::from_row_major(rows, cols, values)?)
}

/// # Safety
/// `out` must be valid for `m.rows() * m.cols()` writes.
unsafe fn matrix_out(m: &NonnegMatrix, out: *mut f64, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    let values = m.to_row_major();
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn state_ref<'a>(state: *const OnmfState) -> Result<&'a OnmfState, Failure> {
    state.as_ref().ok_or(Failure::Null("state"))
}

unsafe fn path_in<'a>(path: *const c_char) -> Result<&'a Path, Failure> {
    if path.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(path).to_str().map_err(|_| Error::InvalidArgument("path is not UTF-8".into()))?;
    Ok(Path::new(s))
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn onmf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a learner with a seeded random `d × r` dictionary.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to be
/// released with [`onmf_state_free`].
#[no_mangle]
pub unsafe extern "C" fn onmf_state_new(d: usize, r: usize, lambda: f64, seed: u64, out: *mut *mut OnmfState) -> OnmfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let inner = OnlineDictionaryState::init(d, r, lambda, seed)?;
        *out = Box::into_raw(Box::new(OnmfState { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `state` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn onmf_state_free(state: *mut OnmfState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Reports the dictionary shape and the number of steps taken.
///
/// # Safety
/// All pointers must be valid; any output pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn onmf_state_info(
    state: *const OnmfState,
    d: *mut usize,
    r: *mut usize,
    steps: *mut u64,
    lambda: *mut f64,
) -> OnmfStatus {
    guard(|| {
        let s = &state_ref(state)?.inner;
        if let Some(p) = d.as_mut() {
            *p = s.dim();
        }
        if let Some(p) = r.as_mut() {
            *p = s.atoms();
        }
        if let Some(p) = steps.as_mut() {
            *p = s.samples_seen();
        }
        if let Some(p) = lambda.as_mut() {
            *p = s.lambda();
        }
        Ok(())
    })
}

/// One online step on the `d × n` mini-batch `x`. When `codes` is non-null it
/// receives the `r × n` code matrix.
///
/// # Safety
/// `x` must hold `d * n` values and `codes`, if non-null, room for `r * n`.
#[no_mangle]
pub unsafe extern "C" fn onmf_state_step(
    state: *mut OnmfState,
    x: *const f64,
    d: usize,
    n: usize,
    codes: *mut f64,
) -> OnmfStatus {
    guard(|| {
        let s = state.as_mut().ok_or(Failure::Null("state"))?;
        let batch = matrix_in(x, d, n, "x")?;
        let h = s.inner.step(&batch)?;
        if !codes.is_null() {
            matrix_out(&h, codes, "codes")?;
        }
        Ok(())
    })
}

/// Writes the `d × n` approximation `W · code(x)` into `out`.
///
/// # Safety
/// `x` must hold `d * n` values and `out` room for as many.
#[no_mangle]
pub unsafe extern "C" fn onmf_state_reconstruct(
    state: *const OnmfState,
    x: *const f64,
    d: usize,
    n: usize,
    out: *mut f64,
) -> OnmfStatus {
    guard(|| {
        let s = state_ref(state)?;
        let batch = matrix_in(x, d, n, "x")?;
        matrix_out(&s.inner.reconstruct(&batch)?, out, "out")
    })
}

/// Copies the `d × r` dictionary into `out`.
///
/// # Safety
/// `out` must have room for `d * r` values.
#[no_mangle]
pub unsafe extern "C" fn onmf_state_dictionary(state: *const OnmfState, out: *mut f64) -> OnmfStatus {
    guard(|| matrix_out(state_ref(state)?.inner.dictionary(), out, "out"))
}

/// Writes the learner to a dictionary file.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn onmf_state_save(state: *const OnmfState, path: *const c_char) -> OnmfStatus {
    guard(|| Ok(persist::save_state(path_in(path)?, &state_ref(state)?.inner)?))
}

/// Reads a learner from a dictionary file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn onmf_state_load(path: *const c_char, out: *mut *mut OnmfState) -> OnmfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let inner = persist::load_state(path_in(path)?)?;
        *out = Box::into_raw(Box::new(OnmfState { inner }));
        Ok(())
    })
}

/// Nonnegative L1-penalized codes of the `d × n` matrix `x` against the
/// `d × r` dictionary `w`, written to the `r × n` buffer `h`.
///
/// # Safety
/// Buffers must match the stated shapes.
#[no_mangle]
pub unsafe extern "C" fn onmf_sparse_code(
    x: *const f64,
    d: usize,
    n: usize,
    w: *const f64,
    r: usize,
    lambda: f64,
    h: *mut f64,
) -> OnmfStatus {
    guard(|| {
        let x = matrix_in(x, d, n, "x")?;
        let w = matrix_in(w, d, r, "w")?;
        let codes = solvers::sparse_code(&x, &w, &SolverOptions::with_lambda(lambda))?;
        matrix_out(&codes, h, "h")
    })
}

/// Offline factorization `x ≈ W H` by multiplicative updates. Writes `d × r`
/// into `w`, `r × n` into `h` and, if non-null, the final squared residual.
///
/// # Safety
/// Buffers must match the stated shapes.
#[no_mangle]
pub unsafe extern "C" fn onmf_fit_nmf(
    x: *const f64,
    d: usize,
    n: usize,
    r: usize,
    iters: usize,
    seed: u64,
    w: *mut f64,
    h: *mut f64,
    residual: *mut f64,
) -> OnmfStatus {
    guard(|| {
        let x = matrix_in(x, d, n, "x")?;
        let fit = nmf::fit_nmf(&x, r, iters, seed)?;
        matrix_out(&fit.w, w, "w")?;
        matrix_out(&fit.h, h, "h")?;
        if let Some(p) = residual.as_mut() {
            *p = nmf::residual_sq(&x, &fit.w, &fit.h);
        }
        Ok(())
    })
}
