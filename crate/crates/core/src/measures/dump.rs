//! Binary sample dumps: an 8-byte header `(n: u32, N: u32)` followed by
//! `N * n` row-major `f64`, all little-endian.

use std::io::{Read, Write};

use crate::error::{KlsError, Result};

pub fn write_samples<W: Write>(out: &mut W, n: usize, points: &[Vec<f64>]) -> Result<()> {
    let n32 = u32::try_from(n).map_err(|_| KlsError::InvalidInput(format!("dimension {n} too large")))?;
    let count = u32::try_from(points.len()).map_err(|_| KlsError::InvalidInput("too many samples for the header".into()))?;
    let mut buf = Vec::with_capacity(8 + 8 * n * points.len());
    buf.extend_from_slice(&n32.to_le_bytes());
    buf.extend_from_slice(&count.to_le_bytes());
    for p in points {
        if p.len() != n {
            return Err(KlsError::InvalidInput(format!("point of length {} in a dimension-{n} dump", p.len())));
        }
        for v in p {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(|e| KlsError::Io(e.to_string()))
}

pub fn read_samples<R: Read>(input: &mut R) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| KlsError::Io(e.to_string()))?;
    if bytes.len() < 8 {
        return Err(KlsError::InvalidInput("sample dump shorter than its header".into()));
    }
    let n = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    if bytes.len() != 8 + 8 * n * count {
        return Err(KlsError::InvalidInput(format!(
            "sample dump has {} bytes, header announces {count} x {n}",
            bytes.len()
        )));
    }
    let values: Vec<f64> =
        bytes[8..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let points = if n == 0 { vec![Vec::new(); count] } else { values.chunks(n).map(|c| c.to_vec()).collect() };
    Ok((n, points))
}
