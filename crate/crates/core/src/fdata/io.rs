//! Curve CSV format: a header row of grid points, then one curve per row.
//! Comma separated, `.` decimal point, UTF-8. Values are written in Rust's
//! shortest round-trip decimal form, so writing and re-reading is lossless.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Grid points from the header and the `rows × points.len()` data block.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub points: Vec<f64>,
    pub curves: DMatrix<f64>,
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<f64>().map_err(|_| {
                Error::Parse(format!("line {lineno}: cannot parse '{tok}' as a number"))
            })
        })
        .collect()
}

/// Reads a curve table. Blank lines are skipped; every data row must match
/// the header width.
pub fn read_curves<R: BufRead>(reader: R) -> Result<CurveTable> {
    let mut points: Option<Vec<f64>> = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim().trim_start_matches('\u{feff}');
        if line.is_empty() {
            continue;
        }
        let values = parse_row(line, idx + 1)?;
        match &points {
            None => points = Some(values),
            Some(p) => {
                if values.len() != p.len() {
                    return Err(Error::Parse(format!(
                        "line {}: expected {} values, found {}",
                        idx + 1,
                        p.len(),
                        values.len()
                    )));
                }
                data.extend(values);
                rows += 1;
            }
        }
    }
    let points = points.ok_or_else(|| Error::Parse("empty CSV: no header row".into()))?;
    if rows == 0 {
        return Err(Error::Parse("CSV holds a header but no curves".into()));
    }
    let curves = DMatrix::from_row_slice(rows, points.len(), &data);
    Ok(CurveTable { points, curves })
}

fn write_row<W: Write>(w: &mut W, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        write!(w, "{v}")?;
    }
    w.write_all(b"\n")
}

/// Writes a header of `points` followed by each row of `curves`.
pub fn write_curves<W: Write>(mut w: W, points: &[f64], curves: &DMatrix<f64>) -> Result<()> {
    if curves.ncols() != points.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            got: curves.ncols(),
        });
    }
    let io = |e: std::io::Error| Error::Parse(e.to_string());
    write_row(&mut w, points.iter().copied()).map_err(io)?;
    for row in curves.row_iter() {
        write_row(&mut w, row.iter().copied()).map_err(io)?;
    }
    w.flush().map_err(io)
}
