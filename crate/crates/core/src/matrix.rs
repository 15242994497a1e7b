//! Dense matrices with an entrywise nonnegativity invariant, and entry masks.

use std::ops::Deref;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// A dense real matrix whose entries are all finite and `>= 0`.
///
/// Carries data matrices, dictionaries, codes and the online aggregates.
/// Derefs to the underlying [`Array2`] for read access; mutation goes
/// through constructors that re-establish the invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegMatrix(Array2<f64>);

impl NonnegMatrix {
    /// Wraps `array`, rejecting negative or non-finite entries.
    pub fn new(array: Array2<f64>) -> Result<Self> {
        for ((row, col), &value) in array.indexed_iter() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeEntry { row, col, value });
            }
        }
        Ok(Self(array))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Array2::zeros((rows, cols)))
    }

    /// Builds a matrix from row-major `data`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        let array = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::shape(e.to_string()))?;
        Self::new(array)
    }

    /// Clamps every entry at zero. Used where an algebraic result is
    /// nonnegative in exact arithmetic but may carry `-0.0` or rounding noise.
    pub fn from_clamped(mut array: Array2<f64>) -> Self {
        array.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
        Self(array)
    }

    pub(crate) fn from_array_unchecked(array: Array2<f64>) -> Self {
        debug_assert!(array.iter().all(|&v| v >= 0.0));
        Self(array)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl Deref for NonnegMatrix {
    type Target = Array2<f64>;

    fn deref(&self) -> &Array2<f64> {
        &self.0
    }
}

impl TryFrom<Array2<f64>> for NonnegMatrix {
    type Error = Error;

    fn try_from(array: Array2<f64>) -> Result<Self> {
        Self::new(array)
    }
}

/// Per-entry observation flags for a matrix or a column vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryMask {
    rows: usize,
    cols: usize,
    observed: Vec<bool>,
}

impl EntryMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self { rows, cols, observed: vec![true; rows * cols] }
    }

    /// Row-major observation flags.
    pub fn from_row_major(rows: usize, cols: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} mask needs {} flags, got {}",
                rows * cols,
                observed.len()
            )));
        }
        Ok(Self { rows, cols, observed })
    }

    /// Mask for a single column vector.
    pub fn column(observed: Vec<bool>) -> Self {
        Self { rows: observed.len(), cols: 1, observed }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[row * self.cols + col]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn is_full(&self) -> bool {
        self.observed.iter().all(|&o| o)
    }

    /// Flags of column `col`, top to bottom.
    pub fn column_flags(&self, col: usize) -> Vec<bool> {
        (0..self.rows).map(|r| self.is_observed(r, col)).collect()
    }

    pub(crate) fn check_dims(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::shape(format!(
                "mask is {}x{}, matrix is {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_conform(what: &str, left: ArrayView2<f64>, right: ArrayView2<f64>) -> Result<()> {
    if left.ncols() != right.nrows() {
        return Err(Error::shape(format!(
            "{what}: {}x{} times {}x{}",
            left.nrows(),
            left.ncols(),
            right.nrows(),
            right.ncols()
        )));
    }
    Ok(())
}
