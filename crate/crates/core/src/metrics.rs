//! Interpolation quality metrics: PSNR, SSIM, interpolation error (IE) and
//! normalized interpolation error (NIE).
//!
//! Reductions are sequential with `f64` accumulators so results are bitwise
//! reproducible.

use crate::error::{Error, Result};
use crate::grid::{Image, Scalar};

/// Returned by [`psnr`] for identical inputs.
pub const PSNR_CAP_DB: f64 = 100.0;

/// SSIM window side.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn check_pair<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::mismatch(
            "metric inputs",
            format!("{}x{}x{}", a.height(), a.width(), a.channels()),
            format!("{}x{}x{}", b.height(), b.width(), b.channels()),
        ));
    }
    Ok(())
}

fn mse<T: Scalar>(a: &Image<T>, b: &Image<T>) -> f64 {
    let n = a.data().len();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = x.to_f64() - y.to_f64();
            d * d
        })
        .sum();
    sum / n as f64
}

/// Peak signal-to-noise ratio for unit peak, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check_pair(a, b)?;
    let m = mse(a, b);
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP_DB))
}

/// Normalized 1-D Gaussian taps of the SSIM window.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable "valid" Gaussian filter of an `h`×`w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut horiz = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            let row = &plane[r * w + c..r * w + c + SSIM_WINDOW];
            horiz[r * ow + c] = row.iter().zip(g).map(|(v, k)| v * k).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..SSIM_WINDOW).map(|k| g[k] * horiz[(r + k) * ow + c]).sum();
        }
    }
    out
}

/// Mean structural similarity over all 11×11 windows fully inside the image
/// (Gaussian weights, σ = 1.5), averaged over channels.
pub fn ssim<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check_pair(a, b)?;
    let (h, w, c) = (a.height(), a.width(), a.channels());
    if h.min(w) < SSIM_WINDOW {
        return Err(Error::GridTooSmall {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let g = gaussian_taps();
    let mut total = 0.0;
    for ch in 0..c {
        let pa: Vec<f64> = a.data().iter().skip(ch).step_by(c).map(|v| v.to_f64()).collect();
        let pb: Vec<f64> = b.data().iter().skip(ch).step_by(c).map(|v| v.to_f64()).collect();
        let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
        let mu_a = filter_valid(&pa, h, w, &g);
        let mu_b = filter_valid(&pb, h, w, &g);
        let aa = filter_valid(&prod(&pa, &pa), h, w, &g);
        let bb = filter_valid(&prod(&pb, &pb), h, w, &g);
        let ab = filter_valid(&prod(&pa, &pb), h, w, &g);
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / c as f64)
}

/// Root-mean-square difference on the 0–255 scale.
pub fn interpolation_error<T: Scalar>(a: &Image<T>, gt: &Image<T>) -> Result<f64> {
    check_pair(a, gt)?;
    Ok(255.0 * mse(a, gt).sqrt())
}

/// 0–255 luminance plane (0.299 R + 0.587 G + 0.114 B); grayscale passes through.
fn luminance<T: Scalar>(img: &Image<T>) -> Vec<f64> {
    let c = img.channels();
    img.data()
        .chunks_exact(c)
        .map(|px| {
            let l = if c == 3 {
                0.299 * px[0].to_f64() + 0.587 * px[1].to_f64() + 0.114 * px[2].to_f64()
            } else {
                px[0].to_f64()
            };
            255.0 * l
        })
        .collect()
}

/// Central difference along one axis; one-sided at the borders, zero on a
/// single-sample axis.
fn diff(plane: &[f64], i: usize, pos: usize, n: usize, stride: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let lo = pos.saturating_sub(1);
    let hi = (pos + 1).min(n - 1);
    (plane[i + (hi - pos) * stride] - plane[i - (pos - lo) * stride]) / (hi - lo) as f64
}

/// Interpolation error normalized by the ground truth's local gradient:
/// `sqrt(mean((255·(a - gt))² / (|∇L|² + 1)))` with `L` the 0–255 luminance of `gt`.
pub fn normalized_interpolation_error<T: Scalar>(a: &Image<T>, gt: &Image<T>) -> Result<f64> {
    check_pair(a, gt)?;
    let (h, w, c) = (gt.height(), gt.width(), gt.channels());
    let n = a.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let lum = luminance(gt);
    let mut sum = 0.0;
    for r in 0..h {
        for col in 0..w {
            let i = r * w + col;
            let gx = diff(&lum, i, col, w, 1);
            let gy = diff(&lum, i, r, h, w);
            let denom = gx * gx + gy * gy + 1.0;
            for ch in 0..c {
                let d = 255.0 * (a.data()[i * c + ch].to_f64() - gt.data()[i * c + ch].to_f64());
                sum += d * d / denom;
            }
        }
    }
    Ok((sum / n as f64).sqrt())
}

/// All four metrics of one comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub ie: f64,
    pub nie: f64,
}

impl MetricReport {
    pub fn compute<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<Self> {
        Ok(MetricReport {
            psnr: psnr(a, b)?,
            ssim: ssim(a, b)?,
            ie: interpolation_error(a, b)?,
            nie: normalized_interpolation_error(a, b)?,
        })
    }
}

impl std::fmt::Display for MetricReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "psnr={:.6} ssim={:.6} ie={:.6} nie={:.6}",
            self.psnr, self.ssim, self.ie, self.nie
        )
    }
}
