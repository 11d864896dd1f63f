//! Little-endian binary matrices.
//!
//! Layout: 8-byte magic `GIMATRIX`, `rows: u32`, `cols: u32` (16-byte header),
//! then `rows * cols` `f64` values in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"GIMATRIX";
pub const HEADER_LEN: usize = 16;

pub fn write_matrix(m: &DMatrix<f64>, mut out: impl Write) -> std::io::Result<()> {
    let rows = u32::try_from(m.nrows()).map_err(std::io::Error::other)?;
    let cols = u32::try_from(m.ncols()).map_err(std::io::Error::other)?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out.write_all(&buf)
}

pub fn read_matrix(mut input: impl Read) -> Result<DMatrix<f64>> {
    let mut header = [0u8; HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::MatrixFormat("truncated header".into()))?;
    if header[..8] != MAGIC {
        return Err(Error::MatrixFormat("bad magic".into()));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    input
        .read_to_end(&mut body)
        .map_err(|e| Error::MatrixFormat(e.to_string()))?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|k| k.checked_mul(8))
        .ok_or_else(|| Error::MatrixFormat("dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(Error::MatrixFormat(format!(
            "expected {expected} payload bytes for {rows}x{cols}, found {}",
            body.len()
        )));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    Ok(DMatrix::from_row_iterator(rows, cols, values))
}

pub fn save_matrix(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix(m, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(std::io::BufReader::new(file))
}
