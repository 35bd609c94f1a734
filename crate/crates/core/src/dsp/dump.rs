//! Binary feature dump format used between pipeline stages.
//!
//! Layout (all little-endian): magic `MSKF`, u32 row count, u32 column
//! count, then `rows * cols` f32 values in row-major order. Matrices are
//! stored as f32 regardless of their in-memory precision; id sequences use
//! the same container for uniformity.

use ndarray::{Array2, ArrayView2};

use super::DspError;

const MAGIC: &[u8; 4] = b"MSKF";

/// Serializes a matrix, casting values to f32.
pub fn write_feature_dump(m: ArrayView2<'_, f64>) -> Vec<u8> {
    let (rows, cols) = m.dim();
    let mut out = Vec::with_capacity(12 + rows * cols * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for row in m.rows() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Deserializes a dump, widening values back to f64.
pub fn read_feature_dump(bytes: &[u8]) -> Result<Array2<f64>, DspError> {
    if bytes.len() < 12 {
        return Err(DspError::BadDump("shorter than header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(DspError::BadDump("bad magic".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n = (rows as u64) * (cols as u64);
    let expected = 12
        + n.checked_mul(4)
            .ok_or_else(|| DspError::BadDump("size overflow".into()))?;
    if bytes.len() as u64 != expected {
        return Err(DspError::BadDump(format!(
            "payload length {} does not match header {}x{}",
            bytes.len() - 12,
            rows,
            cols
        )));
    }
    let mut values = Vec::with_capacity(n as usize);
    for chunk in bytes[12..].chunks_exact(4) {
        values.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| DspError::BadDump(format!("shape error: {e}")))
}
