//! Tab-separated matrix serialization shared by every module.
//!
//! Entries are written with 17 significant digits so a parse round-trip
//! reproduces the exact f64 bits; `inf` stands for +∞.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::io::{BufRead, Write};

/// Format one value with 17 significant digits, or `inf`.
pub fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{:.16e}", x)
    }
}

/// Parse a value written by [`fmt_f64`].
pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        _ => s.parse().ok(),
    }
}

/// Write a matrix, one row per line, preceded by optional `# ...` header lines.
pub fn write_matrix<W: Write>(out: &mut W, header: &[String], m: &DMatrix<f64>) -> Result<()> {
    for h in header {
        writeln!(out, "# {h}")?;
    }
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        writeln!(out, "{}", row.join("\t"))?;
    }
    Ok(())
}

/// Read a matrix written by [`write_matrix`], skipping `#` headers and blank lines.
pub fn read_matrix<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Option<Vec<f64>> = trimmed.split('\t').map(parse_f64).collect();
        let row = row.ok_or_else(|| Error::Parse {
            line: lineno + 1,
            reason: "malformed matrix entry".to_string(),
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    reason: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            reason: "empty matrix".to_string(),
        });
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}
