//! Frame synthesis: time-weighted blend of the two warped frames plus a
//! residual, the Charbonnier training loss, and the end-to-end pipeline.

use crate::error::{Error, Result};
use crate::grid::{check_same_size, DepthMap, FeatureMap, FlowField, Image, KernelField, Scalar, TimeFraction};
use crate::projection::{fill_holes, project_flow, ProjectedFlow};
use crate::warp::{warp_bundle, WarpedBundle};

fn check_same_image<T: Scalar>(what: &'static str, a: &Image<T>, b: &Image<T>) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::mismatch(
            what,
            format!("{}x{}x{}", a.height(), a.width(), a.channels()),
            format!("{}x{}x{}", b.height(), b.width(), b.channels()),
        ));
    }
    Ok(())
}

/// `clamp((1 - t)·warped0 + t·warped1, 0, 1)`.
pub fn blend_frames<T: Scalar>(warped0: &Image<T>, warped1: &Image<T>, t: f64) -> Result<Image<T>> {
    check_same_image("blend inputs", warped0, warped1)?;
    let t = TimeFraction::new(t)?.get();
    let data = warped0
        .data()
        .iter()
        .zip(warped1.data())
        .map(|(a, b)| T::from_f64(((1.0 - t) * a.to_f64() + t * b.to_f64()).clamp(0.0, 1.0)))
        .collect();
    Image::new(warped0.height(), warped0.width(), warped0.channels(), data)
}

/// `clamp(blend + residual, 0, 1)`.
pub fn apply_residual<T: Scalar>(blend: &Image<T>, residual: &Image<T>) -> Result<Image<T>> {
    check_same_image("residual vs blend", blend, residual)?;
    let data = blend
        .data()
        .iter()
        .zip(residual.data())
        .map(|(b, r)| T::from_f64((b.to_f64() + r.to_f64()).clamp(0.0, 1.0)))
        .collect();
    Image::new(blend.height(), blend.width(), blend.channels(), data)
}

/// Charbonnier penalty parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    epsilon: f64,
}

impl LossConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("loss epsilon {epsilon} must be > 0")));
        }
        Ok(LossConfig { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            epsilon: Self::DEFAULT_EPSILON,
        }
    }
}

/// Sum over every element of `sqrt((pred - gt)² + ε²)`.
pub fn charbonnier_loss<T: Scalar>(pred: &Image<T>, gt: &Image<T>, cfg: LossConfig) -> Result<f64> {
    check_same_image("prediction vs ground truth", pred, gt)?;
    let e2 = cfg.epsilon * cfg.epsilon;
    Ok(pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(p, g)| {
            let d = p.to_f64() - g.to_f64();
            (d * d + e2).sqrt()
        })
        .sum())
}

/// Elementwise `(pred - gt) / sqrt((pred - gt)² + ε²)`.
pub fn charbonnier_grad<T: Scalar>(pred: &Image<T>, gt: &Image<T>, cfg: LossConfig) -> Result<Vec<f64>> {
    check_same_image("prediction vs ground truth", pred, gt)?;
    let e2 = cfg.epsilon * cfg.epsilon;
    Ok(pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(p, g)| {
            let d = p.to_f64() - g.to_f64();
            d / (d * d + e2).sqrt()
        })
        .collect())
}

/// Everything the residual predictor may look at.
#[derive(Debug, Clone, Copy)]
pub struct ResidualInputs<'a, T = f32> {
    pub blend: &'a Image<T>,
    pub warped0: &'a WarpedBundle<T>,
    pub warped1: &'a WarpedBundle<T>,
    pub flow_t0: &'a FlowField<T>,
    pub flow_t1: &'a FlowField<T>,
    pub kernels: &'a KernelField<T>,
}

/// Predicts the residual added to the blended frame. Must return an image the
/// shape of `inputs.blend`.
pub trait ResidualHook<T: Scalar = f32> {
    fn residual(&self, inputs: &ResidualInputs<'_, T>) -> Result<Image<T>>;
}

/// The default hook: no residual.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroResidual;

impl<T: Scalar> ResidualHook<T> for ZeroResidual {
    fn residual(&self, inputs: &ResidualInputs<'_, T>) -> Result<Image<T>> {
        let b = inputs.blend;
        Image::filled(b.height(), b.width(), b.channels(), T::default())
    }
}

impl<T: Scalar, F> ResidualHook<T> for F
where
    F: Fn(&ResidualInputs<'_, T>) -> Result<Image<T>>,
{
    fn residual(&self, inputs: &ResidualInputs<'_, T>) -> Result<Image<T>> {
        self(inputs)
    }
}

/// Inputs of one interpolation: both frames with their flows, depths and
/// context features, plus the kernel field shared by both warp directions.
#[derive(Debug, Clone, Copy)]
pub struct FramePair<'a, T = f32> {
    pub frame0: &'a Image<T>,
    pub frame1: &'a Image<T>,
    pub flow01: &'a FlowField<T>,
    pub flow10: &'a FlowField<T>,
    pub depth0: &'a DepthMap<T>,
    pub depth1: &'a DepthMap<T>,
    pub context0: &'a FeatureMap<T>,
    pub context1: &'a FeatureMap<T>,
    pub kernels: &'a KernelField<T>,
}

/// The synthesized frame and the intermediate flows that produced it.
#[derive(Debug, Clone)]
pub struct Interpolation<T = f32> {
    pub frame: Image<T>,
    pub projected_t0: ProjectedFlow<T>,
    pub projected_t1: ProjectedFlow<T>,
    pub flow_t0: FlowField<T>,
    pub flow_t1: FlowField<T>,
}

impl<T: Scalar> FramePair<'_, T> {
    fn check(&self) -> Result<()> {
        check_same_image("frame1 vs frame0", self.frame0, self.frame1)?;
        let f0 = self.frame0;
        check_same_size("flow01 vs frame0", f0, self.flow01)?;
        check_same_size("flow10 vs frame0", f0, self.flow10)?;
        check_same_size("depth0 vs frame0", f0, self.depth0)?;
        check_same_size("depth1 vs frame0", f0, self.depth1)?;
        check_same_size("context0 vs frame0", f0, self.context0)?;
        check_same_size("context1 vs frame0", f0, self.context1)?;
        check_same_size("kernels vs frame0", f0, self.kernels)?;
        Ok(())
    }
}

/// Synthesizes the frame at time `t` between `frame0` and `frame1`.
///
/// F_t→0 projects F_0→1 (pixels of frame 0 travel `t`), F_t→1 projects F_1→0
/// (pixels of frame 1 travel `1 - t`); both are hole-filled, used to warp each
/// frame's bundle, and the blend of the warped frames receives the hook's
/// residual. Errors carry the name of the stage that raised them.
pub fn interpolate_frame<T: Scalar>(
    pair: &FramePair<'_, T>,
    t: f64,
    hook: &impl ResidualHook<T>,
) -> Result<Interpolation<T>> {
    pair.check().map_err(|e| e.in_stage("input check"))?;
    let t = TimeFraction::new(t).map_err(|e| e.in_stage("input check"))?.get();

    let projected_t0 = project_flow(pair.flow01, pair.depth0, t, -t).map_err(|e| e.in_stage("projection t->0"))?;
    let projected_t1 =
        project_flow(pair.flow10, pair.depth1, 1.0 - t, -(1.0 - t)).map_err(|e| e.in_stage("projection t->1"))?;
    let flow_t0 = fill_holes(&projected_t0);
    let flow_t1 = fill_holes(&projected_t1);

    let warped0 = warp_bundle(pair.frame0, pair.depth0, pair.context0, &flow_t0, pair.kernels)
        .map_err(|e| e.in_stage("warp frame0"))?;
    let warped1 = warp_bundle(pair.frame1, pair.depth1, pair.context1, &flow_t1, pair.kernels)
        .map_err(|e| e.in_stage("warp frame1"))?;

    let blend = blend_frames(&warped0.image, &warped1.image, t).map_err(|e| e.in_stage("blend"))?;
    let residual = hook
        .residual(&ResidualInputs {
            blend: &blend,
            warped0: &warped0,
            warped1: &warped1,
            flow_t0: &flow_t0,
            flow_t1: &flow_t1,
            kernels: pair.kernels,
        })
        .map_err(|e| e.in_stage("residual"))?;
    let frame = apply_residual(&blend, &residual).map_err(|e| e.in_stage("residual"))?;

    Ok(Interpolation {
        frame,
        projected_t0,
        projected_t1,
        flow_t0,
        flow_t1,
    })
}
