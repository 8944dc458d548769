//! File formats.
//!
//! Binary grid: the 8-byte magic `MXSPGRD1`, then `N` and `M` as little-endian `u64`,
//! then `N * M` little-endian IEEE-754 doubles in row-major order. The CSV form has one
//! line per row with comma-separated values.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::LseResult;
use crate::model::{Field2D, SinusoidParams};
use crate::spectrum::{Peak, Periodogram};

pub const GRID_MAGIC: &[u8; 8] = b"MXSPGRD1";

pub fn encode_grid(rows: usize, cols: usize, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * values.len());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<Field2D> {
    if bytes.len() < 24 || &bytes[..8] != GRID_MAGIC {
        return Err(Error::Format("missing grid magic".into()));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expect = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format("grid dimensions overflow".into()))?;
    let body = &bytes[24..];
    if body.len() != expect {
        return Err(Error::Format(format!(
            "{rows}x{cols} grid needs {expect} payload bytes, found {}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field2D::new(rows, cols, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_grid(path: &Path, field: &Field2D) -> Result<()> {
    fs::write(
        path,
        encode_grid(field.rows(), field.cols(), field.values()),
    )?;
    Ok(())
}

pub fn write_periodogram(path: &Path, pg: &Periodogram) -> Result<()> {
    let (r, c) = pg.dims();
    fs::write(path, encode_grid(r, c, pg.grid()))?;
    Ok(())
}

/// Reads a grid file, accepting either the binary or the CSV form.
pub fn read_grid(path: &Path) -> Result<Field2D> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(GRID_MAGIC) {
        decode_grid(&bytes)
    } else {
        parse_csv_grid(BufReader::new(&bytes[..]))
    }
}

pub fn grid_to_csv(field: &Field2D) -> String {
    let mut out = String::new();
    for n in 0..field.rows() {
        let line: Vec<String> = field.row(n).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_grid_csv(path: &Path, field: &Field2D) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(grid_to_csv(field).as_bytes())?;
    Ok(())
}

pub fn parse_csv_grid(reader: impl BufRead) -> Result<Field2D> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Format(format!(
                    "line {} has {} values, expected {c}",
                    i + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format("empty grid".into()))?;
    Field2D::new(rows, cols, values).map_err(|e| Error::Format(e.to_string()))
}

/// `rank,omega,upsilon,value`
pub fn peaks_csv(peaks: &[Peak]) -> String {
    let mut out = String::from("rank,omega,upsilon,value\n");
    for (i, p) in peaks.iter().enumerate() {
        out.push_str(&format!(
            "{},{:e},{:e},{:e}\n",
            i + 1,
            p.omega,
            p.upsilon,
            p.value
        ));
    }
    out
}

/// JSON document written by the `estimate` command.
#[derive(Debug, Serialize)]
pub struct EstimateDoc<'a> {
    pub order: usize,
    pub loss: f64,
    pub converged: bool,
    pub iterations: usize,
    pub components: &'a [SinusoidParams],
}

impl<'a> EstimateDoc<'a> {
    pub fn new(order: usize, r: &'a LseResult) -> Self {
        Self {
            order,
            loss: r.loss,
            converged: r.converged,
            iterations: r.iterations,
            components: r.params.components(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_layout() {
        let f = Field2D::new(2, 3, vec![1.0, -2.0, 0.5, 3.0, 4.0, 5.0]).unwrap();
        let bytes = encode_grid(2, 3, f.values());
        assert_eq!(&bytes[..8], b"MXSPGRD1");
        assert_eq!(bytes[8..16], 2u64.to_le_bytes());
        assert_eq!(bytes[16..24], 3u64.to_le_bytes());
        assert_eq!(bytes[24..32], 1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 24 + 48);
        assert_eq!(decode_grid(&bytes).unwrap(), f);
    }

    #[test]
    fn truncated_or_foreign_files_rejected() {
        let bytes = encode_grid(2, 2, &[0.0; 4]);
        assert!(decode_grid(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_grid(b"NOTAGRID").is_err());
    }

    #[test]
    fn csv_grid_round_trip() {
        let f = Field2D::new(2, 2, vec![0.1, 2.0, -3.5, 1e-9]).unwrap();
        let back = parse_csv_grid(BufReader::new(grid_to_csv(&f).as_bytes())).unwrap();
        assert_eq!(back, f);
        assert!(parse_csv_grid(BufReader::new("1,2\n3\n".as_bytes())).is_err());
    }
}
