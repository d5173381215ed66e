//! Grayscale portable float maps (`Pf`). A negative scale marks little-endian
//! samples; rows are stored bottom to top.

use std::path::Path;

use crate::error::{FormatError, Result};
use crate::grid::DepthMap;

/// Writes little-endian with scale `-1`.
pub fn encode_pfm(depth: &DepthMap<f32>) -> Vec<u8> {
    let (h, w) = (depth.height(), depth.width());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * h * w);
    for r in (0..h).rev() {
        for v in &depth.data()[r * w..(r + 1) * w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Splits off one whitespace-delimited header token.
fn token<'a>(buf: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < buf.len() && buf[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < buf.len() && !buf[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(FormatError::Truncated.into());
    }
    std::str::from_utf8(&buf[start..*pos]).map_err(|_| FormatError::BadHeader("non-ascii header".into()).into())
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DepthMap<f32>> {
    let mut pos = 0;
    match token(bytes, &mut pos)? {
        "Pf" => {}
        "PF" => return Err(FormatError::UnsupportedPfmVariant("PF".into()).into()),
        other => return Err(FormatError::BadHeader(format!("expected \"Pf\", found {other:?}")).into()),
    }
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| FormatError::BadHeader(format!("bad {what} {s:?}")).into())
    };
    let w = parse(token(bytes, &mut pos)?, "width")?;
    let h = parse(token(bytes, &mut pos)?, "height")?;
    let scale_tok = token(bytes, &mut pos)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| FormatError::BadHeader(format!("bad scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(FormatError::BadHeader(format!("bad scale {scale_tok:?}")).into());
    }
    // Exactly one whitespace byte separates the header from the samples.
    if bytes.get(pos).is_none_or(|b| !b.is_ascii_whitespace()) {
        return Err(FormatError::Truncated.into());
    }
    pos += 1;
    let n = w.checked_mul(h).ok_or(FormatError::Truncated)?;
    let payload = &bytes[pos..];
    if payload.len() < 4 * n {
        return Err(FormatError::Truncated.into());
    }
    if payload.len() > 4 * n {
        return Err(FormatError::TrailingData.into());
    }
    let little = scale < 0.0;
    let mut data = vec![0.0f32; n];
    for (i, b) in payload.chunks_exact(4).enumerate() {
        let b: [u8; 4] = b.try_into().unwrap();
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (file_row, col) = (i / w, i % w);
        data[(h - 1 - file_row) * w + col] = v;
    }
    DepthMap::new(h, w, data)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DepthMap<f32>> {
    decode_pfm(&std::fs::read(path)?)
}

pub fn write_pfm(depth: &DepthMap<f32>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_pfm(depth))?;
    Ok(())
}
