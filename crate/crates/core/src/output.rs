//! Deterministic text output for numeric results.
//!
//! Every float written by the crate goes through [`fmt_num`], which renders
//! 12 significant digits so repeated runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
}

/// Rounds to 12 significant digits, for JSON payloads.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    fmt_num(x).parse().unwrap_or(x)
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a header line plus rows of pre-rendered cells.
pub fn write_table<P: AsRef<Path>>(path: P, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = String::new();
    buf.push_str(&header.join(","));
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(buf.as_bytes()).map_err(io_err(path))
}

/// Writes an integer index column followed by numeric columns.
pub fn write_columns<P: AsRef<Path>>(
    path: P,
    index_name: &str,
    index: &[usize],
    names: &[&str],
    columns: &[&[f64]],
) -> Result<()> {
    assert_eq!(names.len(), columns.len());
    assert!(columns.iter().all(|c| c.len() == index.len()));
    let rows: Vec<Vec<String>> = index
        .iter()
        .enumerate()
        .map(|(r, i)| {
            std::iter::once(i.to_string())
                .chain(columns.iter().map(|c| fmt_num(c[r])))
                .collect()
        })
        .collect();
    let header: Vec<String> = std::iter::once(index_name)
        .chain(names.iter().copied())
        .map(str::to_string)
        .collect();
    write_table(path, &header, &rows)
}

pub fn write_json<P: AsRef<Path>, T: Serialize>(path: P, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_num(-1234.5), "-1.23450000000e3");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(round_sig(std::f64::consts::PI), 3.14159265359);
    }
}
