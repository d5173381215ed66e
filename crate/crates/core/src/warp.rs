//! Adaptive warping: flow-displaced bilinear sampling modulated by per-pixel
//! 4×4 kernels.
//!
//! For an output pixel `x` with flow `F(x)` and kernel window `k(x)`:
//!
//! ```text
//! out(x) = Σ_{dy,dx ∈ {-1,0,1,2}} k_{dy,dx}(x) · bilinear(source, x + F(x) + (dx, dy))
//! ```
//!
//! With the delta kernel this is plain bilinear backward warping.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    check_same_size, DepthMap, FeatureMap, FlowField, Footprint, Image, KernelField, Raster, Scalar, WarpGrid,
    DELTA_TAP, KERNEL_OFFSETS, KERNEL_TAPS,
};
use crate::scatter::Bins;

/// Sampling point of tap `tap` for output pixel `(row, col)` displaced by `(u, v)`.
#[inline]
fn tap_point(row: usize, col: usize, u: f64, v: f64, tap: usize) -> (f64, f64) {
    let dx = KERNEL_OFFSETS[tap % 4] as f64;
    let dy = KERNEL_OFFSETS[tap / 4] as f64;
    (col as f64 + u + dx, row as f64 + v + dy)
}

fn check_warp_inputs<T: Scalar>(source: &impl Raster<T>, flow: &FlowField<T>, kernels: &KernelField<T>) -> Result<()> {
    check_same_size("source vs flow", source, flow)?;
    check_same_size("source vs kernels", source, kernels)?;
    Ok(())
}

/// Warps `source` by `flow` through `kernels`. An unnormalized kernel field is
/// logged at warn level and applied as given.
pub fn adaptive_warp<T: Scalar, G: WarpGrid<T>>(
    source: &G,
    flow: &FlowField<T>,
    kernels: &KernelField<T>,
) -> Result<G> {
    check_warp_inputs(source, flow, kernels)?;
    if !kernels.is_normalized() {
        log::warn!("adaptive_warp: kernel field is not normalized; applying raw weights");
    }
    Ok(warp_unchecked(source, flow, kernels))
}

/// [`adaptive_warp`] without input checks or the normalization warning.
pub(crate) fn warp_unchecked<T: Scalar, G: WarpGrid<T>>(
    source: &G,
    flow: &FlowField<T>,
    kernels: &KernelField<T>,
) -> G {
    let (h, w, c) = (source.height(), source.width(), source.channels());
    let (src, fd, kd) = (source.data(), flow.data(), kernels.data());
    let mut out = vec![T::default(); h * w * c];
    out.par_chunks_mut(c).enumerate().for_each(|(p, px)| {
        let (row, col) = (p / w, p % w);
        let (u, v) = (fd[2 * p].to_f64(), fd[2 * p + 1].to_f64());
        let window = &kd[p * KERNEL_TAPS..(p + 1) * KERNEL_TAPS];
        let mut acc = vec![0.0f64; c];
        for (tap, kw) in window.iter().enumerate() {
            let kw = kw.to_f64();
            if kw == 0.0 {
                continue;
            }
            let (x, y) = tap_point(row, col, u, v, tap);
            let fp = Footprint::at(h, w, x, y);
            for (ch, a) in acc.iter_mut().enumerate() {
                *a += kw * fp.sample(src, c, ch);
            }
        }
        for (o, a) in px.iter_mut().zip(acc.iter()) {
            *o = T::from_f64(*a);
        }
    });
    source.with_data(out)
}

/// Gradients of a scalar loss w.r.t. the three warp inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpGrads {
    /// Same layout as the source grid.
    pub source: Vec<f64>,
    /// Interleaved `(u, v)`.
    pub flow: Vec<f64>,
    /// 16 taps per pixel.
    pub kernels: Vec<f64>,
}

/// Backward pass of [`adaptive_warp`] given `upstream` = dL/d(output).
///
/// The flow gradient uses the bilinear sampler's spatial derivative and is zero
/// along an axis whose sampling coordinate was clamped. The source gradient is
/// a scatter of kernel-times-bilinear weights, reduced through [`Bins`] so the
/// result does not depend on the thread count.
pub fn adaptive_warp_backward<T: Scalar>(
    source: &impl Raster<T>,
    flow: &FlowField<T>,
    kernels: &KernelField<T>,
    upstream: &[f64],
) -> Result<WarpGrads> {
    check_warp_inputs(source, flow, kernels)?;
    let (h, w, c) = (source.height(), source.width(), source.channels());
    let n = h * w;
    if upstream.len() != n * c {
        return Err(Error::mismatch("upstream gradient length", n * c, upstream.len()));
    }
    let (src, fd, kd) = (source.data(), flow.data(), kernels.data());

    let per_pixel: Vec<([f64; 2], [f64; KERNEL_TAPS])> = (0..n)
        .into_par_iter()
        .map(|p| {
            let (row, col) = (p / w, p % w);
            let (u, v) = (fd[2 * p].to_f64(), fd[2 * p + 1].to_f64());
            let up = &upstream[p * c..(p + 1) * c];
            let mut gk = [0.0; KERNEL_TAPS];
            let mut gf = [0.0; 2];
            for (tap, g) in gk.iter_mut().enumerate() {
                let (x, y) = tap_point(row, col, u, v, tap);
                let fp = Footprint::at(h, w, x, y);
                let kw = kd[p * KERNEL_TAPS + tap].to_f64();
                for (ch, &gu) in up.iter().enumerate() {
                    *g += gu * fp.sample(src, c, ch);
                    let (dx, dy) = fp.gradient(src, c, ch);
                    gf[0] += gu * kw * dx;
                    gf[1] += gu * kw * dy;
                }
            }
            (gf, gk)
        })
        .collect();

    let mut grad_flow = Vec::with_capacity(2 * n);
    let mut grad_kernels = Vec::with_capacity(KERNEL_TAPS * n);
    for (gf, gk) in &per_pixel {
        grad_flow.extend_from_slice(gf);
        grad_kernels.extend_from_slice(gk);
    }

    // Item code = (pixel · 16 + tap) · 4 + corner.
    let footprint_of = |code: usize| {
        let (pt, corner) = (code / 4, code % 4);
        let (p, tap) = (pt / KERNEL_TAPS, pt % KERNEL_TAPS);
        let (u, v) = (fd[2 * p].to_f64(), fd[2 * p + 1].to_f64());
        let (x, y) = tap_point(p / w, p % w, u, v, tap);
        (p, tap, corner, Footprint::at(h, w, x, y))
    };
    let bins = Bins::build(n, n * KERNEL_TAPS * 4, |code| {
        let (_, _, corner, fp) = footprint_of(code);
        Some(fp.index[corner])
    });
    let grad_source: Vec<f64> = bins
        .reduce(|_, members| {
            let mut acc = vec![0.0; c];
            for &code in members {
                let (p, tap, corner, fp) = footprint_of(code as usize);
                let coef = kd[p * KERNEL_TAPS + tap].to_f64() * fp.weight[corner];
                for (ch, a) in acc.iter_mut().enumerate() {
                    *a += coef * upstream[p * c + ch];
                }
            }
            acc
        })
        .into_iter()
        .flatten()
        .collect();

    Ok(WarpGrads {
        source: grad_source,
        flow: grad_flow,
        kernels: grad_kernels,
    })
}

/// Divides every window by its sum. All-zero windows become the delta kernel;
/// windows with a non-positive sum are rejected.
pub fn normalize_kernel_field<T: Scalar>(kernels: &KernelField<T>) -> Result<KernelField<T>> {
    let (h, w) = (kernels.height(), kernels.width());
    let mut out = Vec::with_capacity(kernels.data().len());
    for (p, window) in kernels.data().chunks_exact(KERNEL_TAPS).enumerate() {
        let sum: f64 = window.iter().map(|v| v.to_f64()).sum();
        if window.iter().all(|v| v.to_f64() == 0.0) {
            out.extend((0..KERNEL_TAPS).map(|i| T::from_f64(if i == DELTA_TAP { 1.0 } else { 0.0 })));
        } else if sum > 0.0 {
            out.extend(window.iter().map(|v| T::from_f64(v.to_f64() / sum)));
        } else {
            return Err(Error::NegativeKernelSum {
                row: p / w.max(1),
                col: p % w.max(1),
            });
        }
    }
    Ok(KernelField::from_normalized(h, w, out))
}

/// Frame, depth and context warped with one flow and kernel field.
#[derive(Debug, Clone)]
pub struct WarpedBundle<T = f32> {
    pub image: Image<T>,
    pub depth: DepthMap<T>,
    pub context: FeatureMap<T>,
}

/// Applies [`adaptive_warp`] to a frame, its depth map and its context features.
pub fn warp_bundle<T: Scalar>(
    image: &Image<T>,
    depth: &DepthMap<T>,
    context: &FeatureMap<T>,
    flow: &FlowField<T>,
    kernels: &KernelField<T>,
) -> Result<WarpedBundle<T>> {
    check_same_size("image vs depth", image, depth)?;
    check_same_size("image vs context", image, context)?;
    Ok(WarpedBundle {
        image: adaptive_warp(image, flow, kernels)?,
        depth: adaptive_warp(depth, flow, kernels)?,
        context: adaptive_warp(context, flow, kernels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::bilinear_sample;

    fn ramp(h: usize, w: usize, c: usize) -> Image<f32> {
        Image::from_fn(h, w, c, |r, col, ch| ((r * 7 + col * 3 + ch * 5) % 11) as f32 / 10.0).unwrap()
    }

    #[test]
    fn delta_zero_flow_identity() {
        let img = ramp(5, 6, 3);
        let out = adaptive_warp(&img, &FlowField::zeros(5, 6), &KernelField::delta(5, 6)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn integer_shift_clamps_right_edge() {
        let img = ramp(4, 5, 1);
        let flow = FlowField::from_fn(4, 5, |_, _| (1.0f32, 0.0)).unwrap();
        let out = adaptive_warp(&img, &flow, &KernelField::delta(4, 5)).unwrap();
        for r in 0..4 {
            for c in 0..5 {
                assert_eq!(out.get(r, c, 0), img.get(r, (c + 1).min(4), 0));
            }
        }
    }

    #[test]
    fn constant_source_stays_constant() {
        let img = Image::filled(6, 6, 1, 0.3f32).unwrap();
        let flow = FlowField::from_fn(6, 6, |r, c| (r as f32 * 0.7 - 2.0, c as f32 * -0.4)).unwrap();
        let k = normalize_kernel_field(&KernelField::new(6, 6, (0..576).map(|i| (i % 5) as f32).collect()).unwrap())
            .unwrap();
        let out = adaptive_warp(&img, &flow, &k).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn delta_kernel_is_bilinear_warp() {
        let img = ramp(5, 5, 1);
        let flow = FlowField::from_fn(5, 5, |r, c| (0.3 * r as f32 - 0.9, 0.45 * c as f32 - 1.1)).unwrap();
        let out = adaptive_warp(&img, &flow, &KernelField::delta(5, 5)).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                let (u, v) = flow.get(r, c);
                let s = bilinear_sample(&img, c as f64 + u as f64, r as f64 + v as f64)[0];
                assert_eq!(out.get(r, c, 0), s as f32);
            }
        }
    }

    #[test]
    fn normalization_cases() {
        let k = normalize_kernel_field(&KernelField::new(1, 1, vec![1.0f32; 16]).unwrap()).unwrap();
        assert!(k.data().iter().all(|&v| v == 1.0 / 16.0));
        assert!(k.is_normalized());

        let k = normalize_kernel_field(&KernelField::new(1, 1, vec![0.0f32; 16]).unwrap()).unwrap();
        assert_eq!(k, KernelField::delta(1, 1));

        let mut v = vec![0.0f32; 16];
        v[0] = 2.0;
        let k = normalize_kernel_field(&KernelField::new(1, 1, v).unwrap()).unwrap();
        assert_eq!(k.data()[0], 1.0);
        assert!(k.data()[1..].iter().all(|&x| x == 0.0));

        let mut v = vec![0.0f32; 16];
        v[3] = -1.0;
        assert!(matches!(
            normalize_kernel_field(&KernelField::new(1, 1, v).unwrap()),
            Err(Error::NegativeKernelSum { row: 0, col: 0 })
        ));
    }

    #[test]
    fn backward_identity_source_grad() {
        let img = ramp(4, 4, 3).cast::<f64>();
        let up: Vec<f64> = (0..48).map(|i| (i as f64 * 0.37).sin()).collect();
        let g = adaptive_warp_backward(&img, &FlowField::zeros(4, 4), &KernelField::delta(4, 4), &up).unwrap();
        assert_eq!(g.source, up);
    }

    #[test]
    fn backward_constant_source_has_no_flow_grad() {
        let img = Image::filled(5, 5, 1, 0.6f64).unwrap();
        let flow = FlowField::from_fn(5, 5, |r, c| (0.31 * r as f64, -0.27 * c as f64)).unwrap();
        let k = KernelField::new(5, 5, (0..400).map(|i| ((i * 13) % 7) as f64 / 7.0).collect()).unwrap();
        let g = adaptive_warp_backward(&img, &flow, &k, &[1.0; 25]).unwrap();
        assert!(g.flow.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn bundle_shapes_checked() {
        let img = ramp(3, 3, 1);
        let d = DepthMap::filled(3, 4, 1.0f32).unwrap();
        let ctx = FeatureMap::zeros(3, 3, 2).unwrap();
        let r = warp_bundle(&img, &d, &ctx, &FlowField::zeros(3, 3), &KernelField::delta(3, 3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
