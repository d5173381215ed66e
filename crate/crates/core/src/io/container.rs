//! Private container: 8-byte magic, little-endian `u32` height, width and
//! channel count, then row-major little-endian `f32` values.

use std::path::Path;

use super::Reader;
use crate::error::{FormatError, Result};
use crate::grid::{FeatureMap, KernelField, KERNEL_TAPS};

pub const KERNEL_MAGIC: &[u8; 8] = b"DAFIKRN1";
pub const FEATURE_MAGIC: &[u8; 8] = b"DAFIFTR1";

fn encode(magic: &[u8; 8], h: usize, w: usize, c: usize, data: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 4 * data.len());
    out.extend_from_slice(magic);
    for d in [h, w, c] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(magic: &[u8; 8], bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f32>)> {
    let mut r = Reader::new(bytes);
    if r.take(8)? != magic {
        return Err(FormatError::BadMagic.into());
    }
    let h = r.u32_le()? as usize;
    let w = r.u32_le()? as usize;
    let c = r.u32_le()? as usize;
    let n = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .ok_or(FormatError::Truncated)?;
    Ok((h, w, c, r.f32s_le_to_end(n)?))
}

pub fn encode_kernel_field(k: &KernelField<f32>) -> Vec<u8> {
    encode(KERNEL_MAGIC, k.height(), k.width(), KERNEL_TAPS, k.data())
}

/// Decodes a kernel field; the normalized flag is recomputed from the values.
pub fn decode_kernel_field(bytes: &[u8]) -> Result<KernelField<f32>> {
    let (h, w, c, data) = decode(KERNEL_MAGIC, bytes)?;
    if c != KERNEL_TAPS {
        return Err(FormatError::BadHeader(format!("kernel channel count {c}, expected 16")).into());
    }
    KernelField::new(h, w, data)
}

pub fn encode_feature_map(f: &FeatureMap<f32>) -> Vec<u8> {
    encode(FEATURE_MAGIC, f.height(), f.width(), f.channels(), f.data())
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap<f32>> {
    let (h, w, c, data) = decode(FEATURE_MAGIC, bytes)?;
    FeatureMap::new(h, w, c, data)
}

pub fn read_kernel_field(path: impl AsRef<Path>) -> Result<KernelField<f32>> {
    decode_kernel_field(&std::fs::read(path)?)
}

pub fn write_kernel_field(k: &KernelField<f32>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_kernel_field(k))?;
    Ok(())
}

pub fn read_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap<f32>> {
    decode_feature_map(&std::fs::read(path)?)
}

pub fn write_feature_map(f: &FeatureMap<f32>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_feature_map(f))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn delta_field_keeps_normalized_flag() {
        let k = KernelField::<f32>::delta(3, 2);
        let back = decode_kernel_field(&encode_kernel_field(&k)).unwrap();
        assert!(back.is_normalized());
        assert_eq!(back, k);
    }

    #[test]
    fn header_larger_than_payload() {
        let f = FeatureMap::new(2, 2, 3, vec![0.5f32; 12]).unwrap();
        let mut b = encode_feature_map(&f);
        b[8..12].copy_from_slice(&3u32.to_le_bytes());
        let e = decode_feature_map(&b).unwrap_err();
        assert!(e.to_string().contains("truncated"), "{e}");
    }

    #[test]
    fn wrong_magic_and_channels() {
        let k = encode_kernel_field(&KernelField::delta(1, 1));
        assert!(matches!(
            decode_feature_map(&k),
            Err(Error::Format(FormatError::BadMagic))
        ));
        let f = encode_feature_map(&FeatureMap::zeros(1, 1, 16).unwrap());
        assert!(decode_kernel_field(&f).is_err());
        let f = encode_feature_map(&FeatureMap::zeros(1, 1, 4).unwrap());
        let mut as_kernel = f.clone();
        as_kernel[..8].copy_from_slice(KERNEL_MAGIC);
        assert!(matches!(
            decode_kernel_field(&as_kernel),
            Err(Error::Format(FormatError::BadHeader(_)))
        ));
    }
}
