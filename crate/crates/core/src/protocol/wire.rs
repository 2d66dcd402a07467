//! Matrix body: `rows u64 LE | cols u64 LE | rows·cols f64 LE` (row-major),
//! compressed as a raw DEFLATE stream.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const DIMS_LEN: usize = 16;

/// Uncompressed body; the layout before DEFLATE.
pub fn matrix_body(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(DIMS_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_matrix_body(body: &[u8]) -> Result<Matrix> {
    if body.len() < DIMS_LEN {
        return Err(Error::Frame("matrix body shorter than its dimensions".into()));
    }
    let rows = u64::from_le_bytes(body[..8].try_into().expect("u64"));
    let cols = u64::from_le_bytes(body[8..16].try_into().expect("u64"));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(DIMS_LEN as u64))
        .ok_or_else(|| Error::Frame(format!("matrix dims {rows}x{cols} overflow")))?;
    if expected != body.len() as u64 {
        return Err(Error::Frame(format!("matrix {rows}x{cols} needs {expected} bytes, got {}", body.len())));
    }
    let data = body[DIMS_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("f64"))).collect();
    Matrix::from_vec(rows as usize, cols as usize, data)
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut encoder = DeflateEncoder::new(Vec::new(), Compression::default());
    encoder.write_all(&matrix_body(m)).expect("writing to a Vec");
    encoder.finish().expect("writing to a Vec")
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let mut body = Vec::new();
    DeflateDecoder::new(bytes)
        .read_to_end(&mut body)
        .map_err(|e| Error::Frame(format!("inflate failed: {e}")))?;
    parse_matrix_body(&body)
}

/// Row ranges of `⌈rows / chunk_rows⌉` consecutive chunks.
pub fn chunk_ranges(rows: usize, chunk_rows: usize) -> Result<Vec<(usize, usize)>> {
    if chunk_rows == 0 {
        return Err(Error::Config("chunk_rows must be >= 1".into()));
    }
    Ok((0..rows).step_by(chunk_rows).map(|start| (start, (start + chunk_rows).min(rows))).collect())
}
