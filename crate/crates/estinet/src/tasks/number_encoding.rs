//! Fixed-width number vectors: the IEEE-754 single-precision bit pattern,
//! each bit repeated `r` times for redundancy, zero-padded to the embedding
//! width `d`. Numbers thereby live in the same vector space as word
//! embeddings without any learned parameters.

use super::DataError;

/// Default redundancy and width: 3 * 32 = 96 < 128.
pub const DEFAULT_REDUNDANCY: usize = 3;
pub const DEFAULT_WIDTH: usize = 128;

pub fn encode_number(a: f32, r: usize, d: usize) -> Result<Vec<f32>, DataError> {
    if r == 0 || r * 32 >= d {
        return Err(DataError::Invalid(format!(
            "need 0 < r * 32 < d, got r = {r}, d = {d}"
        )));
    }
    let bits = a.to_bits();
    let mut out = Vec::with_capacity(d);
    for i in (0..32).rev() {
        let bit = if (bits >> i) & 1 == 1 { 1.0 } else { 0.0 };
        out.extend(std::iter::repeat_n(bit, r));
    }
    out.resize(d, 0.0);
    Ok(out)
}

/// Majority vote per bit group undoes the redundancy.
pub fn decode_number(v: &[f32], r: usize, d: usize) -> Result<f32, DataError> {
    if r == 0 || r * 32 >= d || v.len() != d {
        return Err(DataError::Invalid(format!(
            "decode expects length {d} with r = {r}, got {}",
            v.len()
        )));
    }
    let mut bits = 0u32;
    for i in 0..32 {
        let group = &v[i * r..(i + 1) * r];
        let mean: f32 = group.iter().sum::<f32>() / r as f32;
        if mean > 0.5 {
            bits |= 1 << (31 - i);
        }
    }
    Ok(f32::from_bits(bits))
}
