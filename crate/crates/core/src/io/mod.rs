//! On-disk formats: Middlebury `.flo` flows, PFM depth maps, 8-bit PNG/PPM/PGM
//! images, and the private kernel/feature containers.
//!
//! Every reader validates the target grid type before returning, and every
//! format round-trips bit-exactly.

mod container;
mod flo;
mod pfm;
mod raster;

pub use container::{
    decode_feature_map, decode_kernel_field, encode_feature_map, encode_kernel_field, read_feature_map,
    read_kernel_field, write_feature_map, write_kernel_field, FEATURE_MAGIC, KERNEL_MAGIC,
};
pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC, FLO_MAX_DIM};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use raster::{quantize, read_image, write_image, write_mask};

use crate::error::{FormatError, Result};

/// Little-endian cursor over a byte buffer.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(FormatError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(FormatError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// Reads `n` little-endian floats, then requires the buffer to be exhausted.
    pub(crate) fn f32s_le_to_end(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or(FormatError::Truncated)?)?;
        if self.pos != self.buf.len() {
            return Err(FormatError::TrailingData.into());
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}
