//! Binary snapshot of an [`OnlineDictionaryState`].
//!
//! ```text
//! "ONMF1"                     5 bytes
//! version  u32 LE             currently 1
//! d, r, t  u64 LE each
//! lambda   f64 LE
//! W        d·r f64 LE, row-major
//! A        r·r f64 LE, row-major
//! B        r·d f64 LE, row-major
//! ```
//!
//! The payload length must match the header exactly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::online::OnlineDictionaryState;

pub const MAGIC: &[u8; 5] = b"ONMF1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 5 + 4 + 8 * 3 + 8;

pub fn encode_state(state: &OnlineDictionaryState) -> Vec<u8> {
    let (d, r) = state.dictionary().dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (d * r + r * r + r * d));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [d as u64, r as u64, state.samples_seen()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&state.lambda().to_le_bytes());
    for m in [state.dictionary(), state.aggregate_a(), state.aggregate_b()] {
        for v in m.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_state(bytes: &[u8]) -> Result<OnlineDictionaryState> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("dictionary file is {} bytes, shorter than its header", bytes.len())));
    }
    if &bytes[..5] != MAGIC {
        return Err(Error::Format("not a dictionary file (bad magic)".into()));
    }
    let mut cursor = Cursor { bytes, pos: 5 };
    let version = u32::from_le_bytes(cursor.take());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dictionary file version {version}")));
    }
    let d = u64::from_le_bytes(cursor.take());
    let r = u64::from_le_bytes(cursor.take());
    let t = u64::from_le_bytes(cursor.take());
    let lambda = f64::from_le_bytes(cursor.take());

    let expected = d
        .checked_mul(r)
        .and_then(|dr| dr.checked_mul(2))
        .and_then(|n| r.checked_mul(r).and_then(|rr| n.checked_add(rr)))
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::Format(format!(
            "dictionary file is {} bytes but its header ({d}x{r}) implies {}",
            bytes.len(),
            expected.map_or_else(|| "an impossible size".to_string(), |n| n.to_string())
        )));
    }
    let (d, r) = (d as usize, r as usize);
    let w = cursor.matrix(d, r)?;
    let a = cursor.matrix(r, r)?;
    let b = cursor.matrix(r, d)?;
    OnlineDictionaryState::from_parts(w, a, b, t, lambda).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_state(path: &Path, state: &OnlineDictionaryState) -> Result<()> {
    super::write_atomic(path, &encode_state(state))
}

pub fn load_state(path: &Path) -> Result<OnlineDictionaryState> {
    decode_state(&std::fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<NonnegMatrix> {
        let data = (0..rows * cols).map(|_| f64::from_le_bytes(self.take())).collect();
        NonnegMatrix::from_row_major(rows, cols, data).map_err(|e| Error::Format(e.to_string()))
    }
}
