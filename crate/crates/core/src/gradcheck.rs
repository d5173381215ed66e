//! Finite-difference oracle for the hand-written backward passes.
//!
//! The harness functions build random 64-bit instances, rejecting any whose
//! inputs sit near a point where the operator is not smooth (rounding
//! boundaries in the projection, lattice lines in bilinear sampling), and
//! report the worst relative error per differentiated input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{DepthMap, FlowField, Image, KernelField, KERNEL_TAPS};
use crate::projection::{fill_holes, project_flow, project_flow_backward};
use crate::synthesis::{charbonnier_grad, charbonnier_loss, LossConfig};
use crate::warp::{adaptive_warp, adaptive_warp_backward, normalize_kernel_field, warp_unchecked};

pub const DEFAULT_STEP: f64 = 1e-3;

/// Side of the random square grids used by the harness.
pub const CHECK_SIZE: usize = 6;

/// Inputs closer than this to a non-smooth point are resampled. It exceeds the
/// largest coordinate change a probe of size [`DEFAULT_STEP`] can cause.
pub const SMOOTHNESS_MARGIN: f64 = 1e-2;

/// Central differences `(op(x + h·e_i) - op(x - h·e_i)) / 2h` for every element.
pub fn finite_diff<F>(mut op: F, input: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("finite-difference step {h}")));
    }
    let mut x = input.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = op(&x)?;
        x[i] = orig - h;
        let minus = op(&x)?;
        x[i] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// `max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)`.
pub fn compare_grads(analytic: &[f64], numeric: &[f64]) -> Result<f64> {
    if analytic.len() != numeric.len() {
        return Err(Error::mismatch("gradient lengths", analytic.len(), numeric.len()));
    }
    Ok(analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max))
}

/// Worst relative error of one operator input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub operator: &'static str,
    pub input: &'static str,
    pub max_rel_error: f64,
}

impl std::fmt::Display for GradCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} d/{} max_rel_err={:.3e}",
            self.operator, self.input, self.max_rel_error
        )
    }
}

/// `Σ g·(out - base)`; subtracting the unperturbed output keeps the sum's
/// rounding noise far below the finite-difference signal.
fn weighted_delta(g: &[f64], out: &[f64], base: &[f64]) -> f64 {
    g.iter().zip(out).zip(base).map(|((g, o), b)| g * (o - b)).sum()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Distance of `v` to the nearest half-integer (a rounding boundary).
fn to_half(v: f64) -> f64 {
    let f = v - v.floor();
    (f - 0.5).abs()
}

/// Distance of `v` to the nearest integer.
fn to_integer(v: f64) -> f64 {
    (v - v.round()).abs()
}

/// A random projection instance: (flow, depth, t).
pub fn projection_instance(rng: &mut ChaCha8Rng, n: usize) -> (FlowField<f64>, DepthMap<f64>, f64) {
    loop {
        let t = rng.random_range(0.2..0.9);
        let flow = uniform(rng, 2 * n * n, -3.0, 3.0);
        let smooth = flow.chunks_exact(2).enumerate().all(|(i, f)| {
            let (r, c) = ((i / n) as f64, (i % n) as f64);
            to_half(c + t * f[0]) > SMOOTHNESS_MARGIN && to_half(r + t * f[1]) > SMOOTHNESS_MARGIN
        });
        if smooth {
            let depth = uniform(rng, n * n, 0.5, 4.0);
            return (
                FlowField::new(n, n, flow).expect("finite"),
                DepthMap::new(n, n, depth).expect("positive"),
                t,
            );
        }
    }
}

/// Projection plus hole filling, differentiated w.r.t. flow and depth.
pub fn check_projection(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = CHECK_SIZE;
    let (flow, depth, t) = projection_instance(&mut rng, n);
    let scale = -t;
    let g = uniform(&mut rng, 2 * n * n, -1.0, 1.0);
    let forward = |f: &FlowField<f64>, d: &DepthMap<f64>| -> Result<Vec<f64>> {
        Ok(fill_holes(&project_flow(f, d, t, scale)?).into_data())
    };
    let base = forward(&flow, &depth)?;
    let analytic = project_flow_backward(&flow, &depth, t, scale, &g)?;

    let num_flow = finite_diff(
        |x| {
            let out = forward(&FlowField::new(n, n, x.to_vec())?, &depth)?;
            Ok(weighted_delta(&g, &out, &base))
        },
        flow.data(),
        DEFAULT_STEP,
    )?;
    let num_depth = finite_diff(
        |x| {
            let out = forward(&flow, &DepthMap::new(n, n, x.to_vec())?)?;
            Ok(weighted_delta(&g, &out, &base))
        },
        depth.data(),
        DEFAULT_STEP,
    )?;
    Ok(vec![
        GradCheck {
            operator: "projection",
            input: "flow",
            max_rel_error: compare_grads(&analytic.flow, &num_flow)?,
        },
        GradCheck {
            operator: "projection",
            input: "depth",
            max_rel_error: compare_grads(&analytic.depth, &num_depth)?,
        },
    ])
}

/// A random warp instance: (source, flow, kernels).
pub fn warp_instance(rng: &mut ChaCha8Rng, n: usize) -> (Image<f64>, FlowField<f64>, KernelField<f64>) {
    let source = Image::new(n, n, 3, uniform(rng, 3 * n * n, 0.0, 1.0)).expect("finite");
    let flow = loop {
        let f = uniform(rng, 2 * n * n, -2.5, 2.5);
        if f.iter().all(|&v| to_integer(v) > SMOOTHNESS_MARGIN) {
            break FlowField::new(n, n, f).expect("finite");
        }
    };
    let raw = KernelField::new(n, n, uniform(rng, KERNEL_TAPS * n * n, 0.0, 1.0)).expect("finite");
    let kernels = normalize_kernel_field(&raw).expect("positive sums");
    (source, flow, kernels)
}

/// Adaptive warping, differentiated w.r.t. source, flow and kernels.
pub fn check_warp(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = CHECK_SIZE;
    let (source, flow, kernels) = warp_instance(&mut rng, n);
    let g = uniform(&mut rng, 3 * n * n, -1.0, 1.0);
    let base = adaptive_warp(&source, &flow, &kernels)?.into_data();
    let analytic = adaptive_warp_backward(&source, &flow, &kernels, &g)?;

    let num_source = finite_diff(
        |x| {
            let out = adaptive_warp(&Image::new(n, n, 3, x.to_vec())?, &flow, &kernels)?;
            Ok(weighted_delta(&g, out.data(), &base))
        },
        source.data(),
        DEFAULT_STEP,
    )?;
    let num_flow = finite_diff(
        |x| {
            let out = adaptive_warp(&source, &FlowField::new(n, n, x.to_vec())?, &kernels)?;
            Ok(weighted_delta(&g, out.data(), &base))
        },
        flow.data(),
        DEFAULT_STEP,
    )?;
    // Kernel probes break normalization; skip the warning the public entry point logs.
    let num_kernels = finite_diff(
        |x| {
            let out = warp_unchecked(&source, &flow, &KernelField::new(n, n, x.to_vec())?);
            Ok(weighted_delta(&g, out.data(), &base))
        },
        kernels.data(),
        DEFAULT_STEP,
    )?;
    Ok(vec![
        GradCheck {
            operator: "warp",
            input: "source",
            max_rel_error: compare_grads(&analytic.source, &num_source)?,
        },
        GradCheck {
            operator: "warp",
            input: "flow",
            max_rel_error: compare_grads(&analytic.flow, &num_flow)?,
        },
        GradCheck {
            operator: "warp",
            input: "kernels",
            max_rel_error: compare_grads(&analytic.kernels, &num_kernels)?,
        },
    ])
}

/// A random (pred, gt) pair whose elementwise differences stay clear of the
/// Charbonnier kink at zero.
pub fn charbonnier_instance(rng: &mut ChaCha8Rng, h: usize, w: usize) -> (Image<f64>, Image<f64>) {
    let gt = Image::new(h, w, 3, uniform(rng, 3 * h * w, 0.0, 1.0)).expect("finite");
    let pred: Vec<f64> = gt
        .data()
        .iter()
        .map(|&g| loop {
            let p: f64 = rng.random_range(0.0..1.0);
            if (p - g).abs() > SMOOTHNESS_MARGIN {
                break p;
            }
        })
        .collect();
    (Image::new(h, w, 3, pred).expect("finite"), gt)
}

/// Charbonnier loss, differentiated w.r.t. the prediction.
pub fn check_charbonnier(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = CHECK_SIZE;
    let (pred, gt) = charbonnier_instance(&mut rng, n, n);
    let cfg = LossConfig::default();
    let analytic = charbonnier_grad(&pred, &gt, cfg)?;
    let numeric = finite_diff(
        |x| charbonnier_loss(&Image::new(n, n, 3, x.to_vec())?, &gt, cfg),
        pred.data(),
        DEFAULT_STEP,
    )?;
    Ok(vec![GradCheck {
        operator: "charbonnier",
        input: "pred",
        max_rel_error: compare_grads(&analytic, &numeric)?,
    }])
}
