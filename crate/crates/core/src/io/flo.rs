use std::path::Path;

use super::Reader;
use crate::error::{FormatError, Result};
use crate::grid::FlowField;

/// Header tag, the bytes `PIEH` read as a little-endian float.
pub const FLO_MAGIC: f32 = 202021.25;
/// Largest width or height accepted by the reader.
pub const FLO_MAX_DIM: u32 = 99999;

/// Serializes: magic, width, height (little-endian `u32`), then interleaved
/// `(u, v)` little-endian floats, row-major.
pub fn encode_flo(flow: &FlowField<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * flow.data().len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as u32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as u32).to_le_bytes());
    for v in flow.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField<f32>> {
    let mut r = Reader::new(bytes);
    let magic = f32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if magic.to_bits() != FLO_MAGIC.to_bits() {
        return Err(FormatError::BadMagic.into());
    }
    let width = r.u32_le()?;
    let height = r.u32_le()?;
    for d in [width, height] {
        if d > FLO_MAX_DIM {
            return Err(FormatError::DimensionOverflow(d as u64).into());
        }
    }
    let (w, h) = (width as usize, height as usize);
    let data = r.f32s_le_to_end(2 * w * h)?;
    FlowField::new(h, w, data)
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField<f32>> {
    decode_flo(&std::fs::read(path)?)
}

pub fn write_flo(flow: &FlowField<f32>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_flo(flow))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn byte_layout_2x1() {
        let f = FlowField::new(1, 2, vec![1.5f32, -2.0, 0.0, 0.0]).unwrap();
        let b = encode_flo(&f);
        assert_eq!(b.len(), 28);
        assert_eq!(&b[0..4], b"PIEH");
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &1.5f32.to_le_bytes());
        assert_eq!(&b[16..20], &(-2.0f32).to_le_bytes());
        assert_eq!(&b[20..28], &[0u8; 8]);
        assert_eq!(decode_flo(&b).unwrap(), f);
    }

    #[test]
    fn rejects_bad_files() {
        let mut b = encode_flo(&FlowField::zeros(2, 2));
        assert!(matches!(
            decode_flo(&b[..b.len() - 1]),
            Err(Error::Format(FormatError::Truncated))
        ));
        b.push(0);
        assert!(decode_flo(&b).is_err());
        b[0..4].copy_from_slice(&0.0f32.to_le_bytes());
        let e = decode_flo(&b).unwrap_err();
        assert_eq!(e.to_string(), "bad magic");

        let mut big = encode_flo(&FlowField::zeros(0, 0));
        big[4..8].copy_from_slice(&100000u32.to_le_bytes());
        assert!(matches!(
            decode_flo(&big),
            Err(Error::Format(FormatError::DimensionOverflow(100000)))
        ));
    }

    #[test]
    fn rejects_non_finite_payload() {
        let mut b = encode_flo(&FlowField::zeros(1, 1));
        b[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_flo(&b), Err(Error::NonFinite { .. })));
    }
}
