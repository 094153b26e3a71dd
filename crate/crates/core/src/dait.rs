//! `DAIT` tensor serialization.
//!
//! Layout: magic `DAIT`, one `u8` rank, `rank` little-endian `u32` dims, then
//! the row-major `f32` little-endian payload.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"DAIT";

pub fn encode(t: &Tensor<f32>) -> Result<Vec<u8>> {
    if t.rank() > u8::MAX as usize {
        bail!(Format, "rank {} does not fit in one byte", t.rank());
    }
    let mut out = Vec::with_capacity(5 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(&MAGIC);
    out.push(t.rank() as u8);
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| crate::Error::Format(alloc::format!("dim {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() < 5 || bytes[..4] != MAGIC {
        bail!(Format, "missing DAIT magic");
    }
    let rank = bytes[4] as usize;
    let header = 5 + 4 * rank;
    if bytes.len() < header {
        bail!(Format, "truncated DAIT header");
    }
    let shape: Vec<usize> = bytes[5..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    let Some(n) = n else { bail!(Format, "DAIT dims overflow") };
    let payload = &bytes[header..];
    if n.checked_mul(4) != Some(payload.len()) {
        bail!(Format, "DAIT payload has {} bytes, dims {:?} need {}", payload.len(), shape, n.saturating_mul(4));
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Tensor::new(&shape, data)
}
