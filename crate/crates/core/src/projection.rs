//! Depth-aware flow projection.
//!
//! Every source pixel `y` of an input frame travels to `round(y + t·F(y))` at
//! time `t`. The flow at a target is the reciprocal-depth weighted mean of the
//! flows of all pixels landing on it, multiplied by `scale` to reverse its
//! direction, so nearer surfaces dominate where several pixels collide. Targets
//! nobody lands on are holes, filled afterwards from their 4-neighbours.

use crate::error::{Error, Result};
use crate::grid::{check_same_size, DepthMap, FlowField, HoleMask, Raster, Scalar, TimeFraction};
use crate::scatter::Bins;

/// Source pixels landing on each target pixel at time `t`.
#[derive(Debug, Clone)]
pub struct ContributorSet {
    height: usize,
    width: usize,
    bins: Bins,
}

impl ContributorSet {
    /// Source pixel indices (row-major) that land on `(row, col)`, ascending.
    pub fn sources(&self, row: usize, col: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bins
            .members(row * self.width + col)
            .iter()
            .map(move |&i| (i as usize / self.width, i as usize % self.width))
    }

    pub fn count(&self, row: usize, col: usize) -> usize {
        self.bins.members(row * self.width + col).len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub(crate) fn bins(&self) -> &Bins {
        &self.bins
    }
}

/// Pixel reached by a source pixel travelling `t` of its flow; rounding is half
/// away from zero per component, and positions outside the frame are dropped.
#[inline]
fn landing(row: usize, col: usize, u: f64, v: f64, t: f64, height: usize, width: usize) -> Option<usize> {
    let x = (col as f64 + t * u).round();
    let y = (row as f64 + t * v).round();
    if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
        return None;
    }
    Some(y as usize * width + x as usize)
}

/// Enumerates the contributor set of every target pixel.
pub fn contributor_sets<T: Scalar>(flow: &FlowField<T>, t: f64) -> Result<ContributorSet> {
    let t = TimeFraction::new(t)?.get();
    let (h, w) = (flow.height(), flow.width());
    let data = flow.data();
    let bins = Bins::build(h * w, h * w, |i| {
        landing(i / w, i % w, data[2 * i].to_f64(), data[2 * i + 1].to_f64(), t, h, w)
    });
    Ok(ContributorSet {
        height: h,
        width: w,
        bins,
    })
}

/// Output of the projection before hole filling.
#[derive(Debug, Clone)]
pub struct ProjectedFlow<T = f32> {
    pub flow: FlowField<T>,
    pub holes: HoleMask,
    /// Accumulated reciprocal-depth weight per target; zero exactly at holes.
    pub weight_sum: Vec<f64>,
}

/// Weighted sums for one target: (Σw, Σw·u, Σw·v, min depth), with weights
/// taken relative to the nearest member, `w = D_min / D`. This is the same
/// average as `1 / D` weighting but is exactly 1 for equal depths.
fn accumulate<T: Scalar>(members: &[u32], flow: &[T], depth: &[T]) -> (f64, f64, f64, f64) {
    let dmin = members
        .iter()
        .map(|&i| depth[i as usize].to_f64())
        .fold(f64::INFINITY, f64::min);
    let (mut sw, mut su, mut sv) = (0.0, 0.0, 0.0);
    for &i in members {
        let i = i as usize;
        let w = dmin / depth[i].to_f64();
        sw += w;
        su += w * flow[2 * i].to_f64();
        sv += w * flow[2 * i + 1].to_f64();
    }
    (sw, su, sv, dmin)
}

fn check_inputs<T: Scalar>(flow: &FlowField<T>, depth: &DepthMap<T>, t: f64, scale: f64) -> Result<()> {
    check_same_size("flow vs depth", flow, depth)?;
    TimeFraction::new(t)?;
    if !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("projection scale {scale}")));
    }
    Ok(())
}

/// Projects `flow` to time `t`, weighting contributors by `1 / depth`.
///
/// `t` is the fraction of its flow each source pixel travels; `scale` turns the
/// averaged flow into the intermediate flow (`-t` for F_t→0 from F_0→1, and
/// `-(1-t)` for F_t→1 from F_1→0, travelling `1-t`).
pub fn project_flow<T: Scalar>(
    flow: &FlowField<T>,
    depth: &DepthMap<T>,
    t: f64,
    scale: f64,
) -> Result<ProjectedFlow<T>> {
    check_inputs(flow, depth, t, scale)?;
    let sets = contributor_sets(flow, t)?;
    let (fd, dd) = (flow.data(), depth.data());
    let sums = sets.bins().reduce(|_, m| accumulate(m, fd, dd));

    let n = sums.len();
    let mut out = Vec::with_capacity(2 * n);
    let mut holes = Vec::with_capacity(n);
    let mut weight_sum = Vec::with_capacity(n);
    for &(sw, su, sv, dmin) in &sums {
        if sw > 0.0 {
            out.push(T::from_f64(scale * su / sw));
            out.push(T::from_f64(scale * sv / sw));
        } else {
            out.push(T::default());
            out.push(T::default());
        }
        holes.push(sw == 0.0);
        weight_sum.push(if sw > 0.0 { sw / dmin } else { 0.0 });
    }
    Ok(ProjectedFlow {
        flow: FlowField::from_raw(flow.height(), flow.width(), out),
        holes: HoleMask::new(flow.height(), flow.width(), holes)?,
        weight_sum,
    })
}

/// Order in which holes are filled: one entry per sweep, each listing the
/// holes filled in that sweep with the already-known 4-neighbours they average.
#[derive(Debug, Clone, Default)]
struct FillPlan {
    sweeps: Vec<Vec<(usize, Vec<usize>)>>,
}

impl FillPlan {
    fn new(holes: &HoleMask) -> FillPlan {
        let (h, w) = (holes.height(), holes.width());
        let mut known: Vec<bool> = holes.data().iter().map(|&x| !x).collect();
        let mut sweeps = Vec::new();
        loop {
            let mut sweep = Vec::new();
            for r in 0..h {
                for c in 0..w {
                    let i = r * w + c;
                    if known[i] {
                        continue;
                    }
                    let mut nbrs = Vec::with_capacity(4);
                    if r > 0 && known[i - w] {
                        nbrs.push(i - w);
                    }
                    if c > 0 && known[i - 1] {
                        nbrs.push(i - 1);
                    }
                    if c + 1 < w && known[i + 1] {
                        nbrs.push(i + 1);
                    }
                    if r + 1 < h && known[i + w] {
                        nbrs.push(i + w);
                    }
                    if !nbrs.is_empty() {
                        sweep.push((i, nbrs));
                    }
                }
            }
            if sweep.is_empty() {
                break;
            }
            for (i, _) in &sweep {
                known[*i] = true;
            }
            sweeps.push(sweep);
        }
        FillPlan { sweeps }
    }
}

/// Fills holes outside-in: each sweep assigns every hole with at least one
/// known 4-neighbour the mean of those neighbours, reading only values known
/// before the sweep. Holes that can never be reached (an all-hole field) stay
/// at zero flow.
pub fn fill_holes<T: Scalar>(projected: &ProjectedFlow<T>) -> FlowField<T> {
    let plan = FillPlan::new(&projected.holes);
    let mut data = projected.flow.data().to_vec();
    for sweep in &plan.sweeps {
        for (i, nbrs) in sweep {
            let (mut u, mut v) = (0.0, 0.0);
            for &n in nbrs {
                u += data[2 * n].to_f64();
                v += data[2 * n + 1].to_f64();
            }
            let k = nbrs.len() as f64;
            data[2 * i] = T::from_f64(u / k);
            data[2 * i + 1] = T::from_f64(v / k);
        }
    }
    FlowField::from_raw(projected.flow.height(), projected.flow.width(), data)
}

/// Gradients of a scalar loss w.r.t. the projection inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrads {
    /// Interleaved `(u, v)`, same layout as the input flow.
    pub flow: Vec<f64>,
    pub depth: Vec<f64>,
}

/// Backward pass of `fill_holes(project_flow(flow, depth, t, scale))`.
///
/// `upstream` is dL/d(filled flow), interleaved like a flow field. Set
/// membership is treated as constant, since rounding is piecewise constant.
pub fn project_flow_backward<T: Scalar>(
    flow: &FlowField<T>,
    depth: &DepthMap<T>,
    t: f64,
    scale: f64,
    upstream: &[f64],
) -> Result<ProjectionGrads> {
    check_inputs(flow, depth, t, scale)?;
    let n = flow.len_pixels();
    if upstream.len() != 2 * n {
        return Err(Error::mismatch("upstream gradient length", 2 * n, upstream.len()));
    }
    if let Some(i) = upstream.iter().position(|g| !g.is_finite()) {
        let p = i / 2;
        return Err(Error::NonFinite {
            grid: "upstream gradient",
            row: p / flow.width(),
            col: p % flow.width(),
        });
    }
    let sets = contributor_sets(flow, t)?;
    let (fd, dd) = (flow.data(), depth.data());
    let sums = sets.bins().reduce(|_, m| accumulate(m, fd, dd));
    let holes: Vec<bool> = sums.iter().map(|s| s.0 == 0.0).collect();

    // Hole filling is linear: push gradients back through the sweeps in reverse.
    let plan = FillPlan::new(&HoleMask::new(flow.height(), flow.width(), holes)?);
    let mut g = upstream.to_vec();
    for sweep in plan.sweeps.iter().rev() {
        for (i, nbrs) in sweep {
            let k = nbrs.len() as f64;
            let (gu, gv) = (g[2 * i] / k, g[2 * i + 1] / k);
            for &nb in nbrs {
                g[2 * nb] += gu;
                g[2 * nb + 1] += gv;
            }
        }
    }

    // Each source pixel lands on at most one target, so per-source gradients
    // are written without collisions.
    let mut grad_flow = vec![0.0; 2 * n];
    let mut grad_depth = vec![0.0; n];
    let per_target: Vec<Vec<(usize, f64, f64, f64)>> = sets.bins().reduce(|x, members| {
        let (sw, su, sv, dmin) = sums[x];
        if sw == 0.0 {
            return Vec::new();
        }
        let (gu, gv) = (g[2 * x], g[2 * x + 1]);
        let (mu, mv) = (su / sw, sv / sw);
        members
            .iter()
            .map(|&y| {
                let y = y as usize;
                let d = dd[y].to_f64();
                let w = dmin / d;
                let (fu, fv) = (fd[2 * y].to_f64(), fd[2 * y + 1].to_f64());
                // With w = 1/D: d out / d w_y = scale · (F_y − mean) / Σw and
                // d w / d D = −1/D². Σ(1/D) = sw / dmin.
                let dw = scale * (gu * (fu - mu) + gv * (fv - mv)) * dmin / sw;
                (y, scale * w / sw * gu, scale * w / sw * gv, -dw / (d * d))
            })
            .collect()
    });
    for (y, du, dv, dd) in per_target.into_iter().flatten() {
        grad_flow[2 * y] = du;
        grad_flow[2 * y + 1] = dv;
        grad_depth[y] = dd;
    }
    Ok(ProjectionGrads {
        flow: grad_flow,
        depth: grad_depth,
    })
}

/// Uniform-weight projection, the depth-agnostic baseline: each target takes
/// the plain mean of its contributors' flows.
pub fn project_flow_unweighted<T: Scalar>(flow: &FlowField<T>, t: f64, scale: f64) -> Result<ProjectedFlow<T>> {
    let ones = DepthMap::new(flow.height(), flow.width(), vec![T::from_f64(1.0); flow.len_pixels()])?;
    project_flow(flow, &ones, t, scale)
}
