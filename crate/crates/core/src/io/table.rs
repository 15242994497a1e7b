//! Series CSV and `key=value` metadata files.
//!
//! Series CSV: a header `time,series_1,...,series_m`, then one row per tick.
//! An empty cell, or a value equal to the sentinel, marks a missing entry.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use crate::error::{Error, Result};
use crate::timeseries::SeriesEnsemble;

pub const DEFAULT_SENTINEL: f64 = -100.0;

/// A parsed series CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub times: Vec<String>,
    pub names: Vec<String>,
    /// `names.len()` series of `times.len()` samples.
    pub series: Vec<Vec<Option<f64>>>,
}

impl SeriesTable {
    /// Ensemble with the minimal nonnegativity offset.
    pub fn to_ensemble(&self) -> Result<SeriesEnsemble> {
        SeriesEnsemble::from_options(&self.series)
    }
}

pub fn read_series_csv<R: Read>(reader: R, sentinel: f64) -> Result<SeriesTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(Error::Parse { line: 1, message: "empty input, expected a header row".into() }),
        Some(rec) => rec.map_err(|e| csv_error(e, 1))?,
    };
    if header.len() < 2 || !header[0].trim().eq_ignore_ascii_case("time") {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `time,<series>,...` with at least one series".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut times = Vec::new();
    let mut series = vec![Vec::new(); names.len()];
    for rec in records {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != names.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len() + 1, rec.len()),
            });
        }
        times.push(rec[0].trim().to_string());
        for (i, cell) in rec.iter().skip(1).enumerate() {
            let cell = cell.trim();
            let value = if cell.is_empty() {
                None
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{cell}` in column {} is not a number", i + 2),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, message: format!("`{cell}` is not finite") });
                }
                (v != sentinel).then_some(v)
            };
            series[i].push(value);
        }
    }
    Ok(SeriesTable { times, names, series })
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::Parse { line, message: err.to_string() }
}

/// Writes series in the input layout; `None` becomes an empty cell.
pub fn write_series_csv(times: &[String], names: &[String], series: &[Vec<Option<f64>>]) -> Result<String> {
    if names.len() != series.len() || series.iter().any(|s| s.len() != times.len()) {
        return Err(Error::shape("series table is ragged"));
    }
    let mut out = String::from("time");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (t, time) in times.iter().enumerate() {
        out.push_str(time);
        for s in series {
            out.push(',');
            if let Some(v) = s[t] {
                write!(out, "{v}").expect("write to string");
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// `key=value` lines in the given order.
pub fn format_metadata(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_metadata(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: n as u64 + 1,
            message: "expected key=value".into(),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Reads `row,col,class` label rows (an optional header is skipped).
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<((usize, usize), u32)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(e, idx as u64 + 1))?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::Parse { line, message: format!("expected row,col,class, found {} fields", rec.len()) });
        }
        let parsed = (rec[0].trim().parse::<usize>(), rec[1].trim().parse::<usize>(), rec[2].trim().parse::<u32>());
        match parsed {
            (Ok(r), Ok(c), Ok(class)) => out.push(((r, c), class)),
            _ if idx == 0 => continue,
            _ => return Err(Error::Parse { line, message: "row, col and class must be nonnegative integers".into() }),
        }
    }
    Ok(out)
}
