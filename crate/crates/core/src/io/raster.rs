//! 8-bit images through the `image` crate. Decoding divides codes by 255;
//! encoding rounds half up to the nearest code.

use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use crate::error::{Error, FormatError, Result};
use crate::grid::{HoleMask, Image};

/// Nearest 8-bit code of an intensity, ties rounding up, clamped to [0, 255].
pub fn quantize(v: f32) -> u8 {
    (v as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image<f32>> {
    let img = ImageReader::open(path)?.with_guessed_format()?.decode()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, bytes) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgba8(_) => {
            return Err(FormatError::UnsupportedLayout("alpha channel".into()).into())
        }
        _ => return Err(FormatError::UnsupportedBitDepth.into()),
    };
    Image::new(h, w, channels, bytes.into_iter().map(|b| b as f32 / 255.0).collect())
}

fn write_bytes(path: &Path, bytes: &[u8], w: u32, h: u32, channels: usize) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let color = if channels == 3 {
        ExtendedColorType::Rgb8
    } else {
        ExtendedColorType::L8
    };
    match ext.as_str() {
        "png" => image::save_buffer_with_format(path, bytes, w, h, color, ImageFormat::Png)?,
        "ppm" | "pgm" | "pnm" => {
            let want = match ext.as_str() {
                "ppm" => Some(3),
                "pgm" => Some(1),
                _ => None,
            };
            if want.is_some_and(|c| c != channels) {
                return Err(FormatError::UnsupportedLayout(format!("{channels}-channel image as .{ext}")).into());
            }
            let subtype = if channels == 3 {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            };
            let file = std::io::BufWriter::new(std::fs::File::create(path)?);
            PnmEncoder::new(file)
                .with_subtype(subtype)
                .write_image(bytes, w, h, color)?;
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown image extension {:?} (png, ppm, pgm, pnm)",
                path.display()
            )))
        }
    }
    Ok(())
}

/// Writes an 8-bit PNG or binary PPM/PGM, chosen by file extension.
pub fn write_image(image: &Image<f32>, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = image.data().iter().map(|&v| quantize(v)).collect();
    write_bytes(
        path.as_ref(),
        &bytes,
        image.width() as u32,
        image.height() as u32,
        image.channels(),
    )
}

/// Writes a mask as a grayscale image, 255 where set.
pub fn write_mask(mask: &HoleMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.data().iter().map(|&m| if m { 255 } else { 0 }).collect();
    write_bytes(path.as_ref(), &bytes, mask.width() as u32, mask.height() as u32, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization() {
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.7), 255);
        for code in 0..=255u8 {
            assert_eq!(quantize(code as f32 / 255.0), code);
        }
    }

    #[test]
    fn rejects_16_bit_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.png");
        let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 2, vec![0u16, 1000, 40000, 65535]).unwrap();
        buf.save(&p).unwrap();
        let e = read_image(&p).unwrap_err();
        assert_eq!(e.to_string(), "unsupported bit depth");
    }

    #[test]
    fn ppm_payload_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ppm");
        let mut file = b"P6\n3 2\n255\n".to_vec();
        let payload: Vec<u8> = (0..18).map(|i| (i * 14) as u8).collect();
        file.extend_from_slice(&payload);
        std::fs::write(&p, &file).unwrap();
        let img = read_image(&p).unwrap();
        let q = dir.path().join("b.ppm");
        write_image(&img, &q).unwrap();
        let out = std::fs::read(&q).unwrap();
        assert_eq!(&out[out.len() - 18..], &payload[..]);
        assert_eq!(read_image(&q).unwrap(), img);
    }

    #[test]
    fn extension_and_layout_checks() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::filled(2, 2, 1, 0.5f32).unwrap();
        assert!(write_image(&img, dir.path().join("x.bmp")).is_err());
        assert!(write_image(&img, dir.path().join("x.ppm")).is_err());
        write_image(&img, dir.path().join("x.pgm")).unwrap();
        let m = HoleMask::new(1, 2, vec![true, false]).unwrap();
        write_mask(&m, dir.path().join("m.pgm")).unwrap();
        let back = read_image(dir.path().join("m.pgm")).unwrap();
        assert_eq!(back.data(), &[1.0, 0.0]);
    }
}
