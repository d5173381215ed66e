//! Dense grid types shared by every operator.
//!
//! All grids are row-major. Pixel positions are written `(x, y)` = (column, row)
//! when they are continuous sampling coordinates and `(row, col)` when they are
//! lattice indices. Storage is generic over [`Scalar`] so the gradient checks can
//! run the exact same operators in 64-bit; the default element type is `f32`.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// Storage element of a grid. Arithmetic inside operators is done in `f64`.
pub trait Scalar: Copy + Default + Send + Sync + PartialOrd + Debug + 'static {
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Checks a grid's type invariants, reporting the first violation.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

/// Read access to a channel-interleaved grid.
pub trait Raster<T: Scalar> {
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    fn channels(&self) -> usize;
    fn data(&self) -> &[T];

    fn len_pixels(&self) -> usize {
        self.height() * self.width()
    }

    #[inline]
    fn at(&self, row: usize, col: usize, ch: usize) -> T {
        self.data()[(row * self.width() + col) * self.channels() + ch]
    }
}

/// A raster that can be rebuilt with new data of the same shape. Used by the
/// warping operators to return the same grid kind they were given.
pub trait WarpGrid<T: Scalar>: Raster<T> + Sized {
    /// Builds a grid of the same kind and shape around `data`. Only the shape
    /// is checked; value invariants are the caller's responsibility.
    fn with_data(&self, data: Vec<T>) -> Self;
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::mismatch(what, expected, found));
    }
    Ok(())
}

fn check_finite<T: Scalar>(grid: &'static str, data: &[T], width: usize, stride: usize) -> Result<()> {
    match data.iter().position(|v| !v.to_f64().is_finite()) {
        Some(i) => {
            let p = i / stride;
            Err(Error::NonFinite {
                grid,
                row: p / width.max(1),
                col: p % width.max(1),
            })
        }
        None => Ok(()),
    }
}

macro_rules! raster_impl {
    ($ty:ident, $channels:expr) => {
        impl<T: Scalar> Raster<T> for $ty<T> {
            fn height(&self) -> usize {
                self.height
            }
            fn width(&self) -> usize {
                self.width
            }
            #[allow(clippy::redundant_closure_call)]
            fn channels(&self) -> usize {
                ($channels)(self)
            }
            fn data(&self) -> &[T] {
                &self.data
            }
        }

        impl<T: Scalar> $ty<T> {
            pub fn height(&self) -> usize {
                self.height
            }
            pub fn width(&self) -> usize {
                self.width
            }
            pub fn data(&self) -> &[T] {
                &self.data
            }
            pub fn into_data(self) -> Vec<T> {
                self.data
            }
        }
    };
}

/// H×W×C intensities, nominally in `[0, 1]`, with C ∈ {1, 3}.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T = f32> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

raster_impl!(Image, |g: &Image<T>| g.channels);

impl<T: Scalar> Image<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        let img = Image {
            height,
            width,
            channels,
            data,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image from `f(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> T {
        self.at(row, col, ch)
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn same_shape(&self, other: &Image<T>) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }
}

impl<T: Scalar> Validate for Image<T> {
    fn validate(&self) -> Result<()> {
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::InvalidChannels(self.channels));
        }
        check_len(
            "image data length",
            self.height * self.width * self.channels,
            self.data.len(),
        )?;
        check_finite("image", &self.data, self.width, self.channels)
    }
}

impl<T: Scalar> WarpGrid<T> for Image<T> {
    fn with_data(&self, data: Vec<T>) -> Self {
        assert_eq!(data.len(), self.data.len());
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }
}

/// H×W×C contextual features; any channel count ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T = f32> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

raster_impl!(FeatureMap, |g: &FeatureMap<T>| g.channels);

impl<T: Scalar> FeatureMap<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        let f = FeatureMap {
            height,
            width,
            channels,
            data,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(height, width, channels, vec![T::default(); height * width * channels])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMap<U> {
        FeatureMap {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

impl<T: Scalar> Validate for FeatureMap<T> {
    fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::mismatch("feature channels", ">= 1", 0));
        }
        check_len(
            "feature data length",
            self.height * self.width * self.channels,
            self.data.len(),
        )?;
        check_finite("feature map", &self.data, self.width, self.channels)
    }
}

impl<T: Scalar> WarpGrid<T> for FeatureMap<T> {
    fn with_data(&self, data: Vec<T>) -> Self {
        assert_eq!(data.len(), self.data.len());
        FeatureMap {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }
}

/// H×W strictly positive depths.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T = f32> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

raster_impl!(DepthMap, |_: &DepthMap<T>| 1);

impl<T: Scalar> DepthMap<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        let d = DepthMap { height, width, data };
        d.validate()?;
        Ok(d)
    }

    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn cast<U: Scalar>(&self) -> DepthMap<U> {
        DepthMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

impl<T: Scalar> Validate for DepthMap<T> {
    fn validate(&self) -> Result<()> {
        check_len("depth data length", self.height * self.width, self.data.len())?;
        check_finite("depth map", &self.data, self.width, 1)?;
        if let Some(i) = self.data.iter().position(|v| v.to_f64() <= 0.0) {
            return Err(Error::NonPositiveDepth {
                row: i / self.width,
                col: i % self.width,
            });
        }
        Ok(())
    }
}

impl<T: Scalar> WarpGrid<T> for DepthMap<T> {
    fn with_data(&self, data: Vec<T>) -> Self {
        assert_eq!(data.len(), self.data.len());
        DepthMap {
            height: self.height,
            width: self.width,
            data,
        }
    }
}

/// H×W×2 displacements, `(u, v)` = (horizontal, vertical) pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T = f32> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

raster_impl!(FlowField, |_: &FlowField<T>| 2);

impl<T: Scalar> FlowField<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        let f = FlowField { height, width, data };
        f.validate()?;
        Ok(f)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        FlowField {
            height,
            width,
            data: vec![T::default(); 2 * height * width],
        }
    }

    /// Builds a flow from `f(row, col) -> (u, v)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> (T, T)) -> Result<Self> {
        let mut data = Vec::with_capacity(2 * height * width);
        for r in 0..height {
            for c in 0..width {
                let (u, v) = f(r, c);
                data.push(u);
                data.push(v);
            }
        }
        Self::new(height, width, data)
    }

    pub fn get(&self, row: usize, col: usize) -> (T, T) {
        let i = 2 * (row * self.width + col);
        (self.data[i], self.data[i + 1])
    }

    pub fn cast<U: Scalar>(&self) -> FlowField<U> {
        FlowField {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), 2 * height * width);
        FlowField { height, width, data }
    }
}

impl<T: Scalar> Validate for FlowField<T> {
    fn validate(&self) -> Result<()> {
        check_len("flow data length", 2 * self.height * self.width, self.data.len())?;
        check_finite("flow field", &self.data, self.width, 2)
    }
}

/// Number of taps in a per-pixel kernel window.
pub const KERNEL_TAPS: usize = 16;

/// Window offsets along each axis; taps are indexed `4 * (dy + 1) + (dx + 1)`.
pub const KERNEL_OFFSETS: [i32; 4] = [-1, 0, 1, 2];

/// Tap index of offset (0, 0), the delta kernel's only nonzero weight.
pub const DELTA_TAP: usize = 5;

const NORMALIZED_TOLERANCE: f64 = 1e-5;

/// H×W grid of 4×4 interpolation kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField<T = f32> {
    height: usize,
    width: usize,
    data: Vec<T>,
    normalized: bool,
}

raster_impl!(KernelField, |_: &KernelField<T>| KERNEL_TAPS);

impl<T: Scalar> KernelField<T> {
    /// Validates the field; the `normalized` flag is set when every window
    /// sums to one within 1e-5.
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        let mut k = KernelField {
            height,
            width,
            data,
            normalized: false,
        };
        k.validate()?;
        k.normalized = k.window_sums_are_unit();
        Ok(k)
    }

    /// The kernel that reduces adaptive warping to plain bilinear warping.
    pub fn delta(height: usize, width: usize) -> Self {
        let mut data = vec![T::default(); KERNEL_TAPS * height * width];
        for px in 0..height * width {
            data[px * KERNEL_TAPS + DELTA_TAP] = T::from_f64(1.0);
        }
        KernelField {
            height,
            width,
            data,
            normalized: true,
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn window(&self, row: usize, col: usize) -> &[T] {
        let i = (row * self.width + col) * KERNEL_TAPS;
        &self.data[i..i + KERNEL_TAPS]
    }

    pub fn cast<U: Scalar>(&self) -> KernelField<U> {
        let data: Vec<U> = self.data.iter().map(|v| U::from_f64(v.to_f64())).collect();
        let mut k = KernelField {
            height: self.height,
            width: self.width,
            data,
            normalized: false,
        };
        k.normalized = k.window_sums_are_unit();
        k
    }

    fn window_sums_are_unit(&self) -> bool {
        self.data.chunks_exact(KERNEL_TAPS).all(|w| {
            let s: f64 = w.iter().map(|v| v.to_f64()).sum();
            (s - 1.0).abs() <= NORMALIZED_TOLERANCE
        })
    }

    pub(crate) fn from_normalized(height: usize, width: usize, data: Vec<T>) -> Self {
        KernelField {
            height,
            width,
            data,
            normalized: true,
        }
    }
}

impl<T: Scalar> Validate for KernelField<T> {
    fn validate(&self) -> Result<()> {
        check_len(
            "kernel data length",
            KERNEL_TAPS * self.height * self.width,
            self.data.len(),
        )?;
        check_finite("kernel field", &self.data, self.width, KERNEL_TAPS)?;
        if self.normalized && !self.window_sums_are_unit() {
            return Err(Error::InvalidArgument(
                "kernel field flagged normalized has a window not summing to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Positions of a projected flow that received no contributor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoleMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl HoleMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        check_len("mask data length", height * width, data.len())?;
        Ok(HoleMask { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&h| h).count()
    }
}

/// Time of the synthesized frame, `0 <= t <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TimeFraction(f64);

impl TimeFraction {
    pub fn new(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidTime(t));
        }
        Ok(TimeFraction(t))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Ensures two rasters share height and width.
pub(crate) fn check_same_size<T: Scalar, U: Scalar>(
    what: &'static str,
    a: &impl Raster<T>,
    b: &impl Raster<U>,
) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::mismatch(
            what,
            format!("{}x{}", a.height(), a.width()),
            format!("{}x{}", b.height(), b.width()),
        ));
    }
    Ok(())
}

/// Bilinear weights around a continuous point, with border clamping.
///
/// Corners are ordered (y0,x0), (y0,x1), (y1,x0), (y1,x1). `d_dx` / `d_dy` are
/// the derivatives of the weights w.r.t. the unclamped coordinate; they vanish
/// on an axis whose coordinate was clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub index: [usize; 4],
    pub weight: [f64; 4],
    pub d_dx: [f64; 4],
    pub d_dy: [f64; 4],
    fx: f64,
    fy: f64,
}

impl Footprint {
    pub fn at(height: usize, width: usize, x: f64, y: f64) -> Self {
        let (x0, x1, fx, live_x) = axis(x, width);
        let (y0, y1, fy, live_y) = axis(y, height);
        let (gx, gy) = (1.0 - fx, 1.0 - fy);
        let sx = if live_x { 1.0 } else { 0.0 };
        let sy = if live_y { 1.0 } else { 0.0 };
        Footprint {
            index: [y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1],
            weight: [gx * gy, fx * gy, gx * fy, fx * fy],
            d_dx: [-gy * sx, gy * sx, -fy * sx, fy * sx],
            d_dy: [-gx * sy, -fx * sy, gx * sy, fx * sy],
            fx,
            fy,
        }
    }

    /// Interpolated value of channel `ch` of a `channels`-interleaved buffer.
    ///
    /// Evaluated as nested lerps, which equals the weighted sum but is exact on
    /// constant neighbourhoods and at lattice points.
    #[inline]
    pub fn sample<T: Scalar>(&self, data: &[T], channels: usize, ch: usize) -> f64 {
        let v = |k: usize| data[self.index[k] * channels + ch].to_f64();
        let (fx, fy) = (self.fx, self.fy);
        let top = v(0) + fx * (v(1) - v(0));
        let bottom = v(2) + fx * (v(3) - v(2));
        top + fy * (bottom - top)
    }

    /// Spatial gradient `(d/dx, d/dy)` of the interpolated channel.
    #[inline]
    pub fn gradient<T: Scalar>(&self, data: &[T], channels: usize, ch: usize) -> (f64, f64) {
        let (mut gx, mut gy) = (0.0, 0.0);
        for k in 0..4 {
            let v = data[self.index[k] * channels + ch].to_f64();
            gx += self.d_dx[k] * v;
            gy += self.d_dy[k] * v;
        }
        (gx, gy)
    }
}

/// Returns (lower index, upper index, fraction, unclamped) along one axis.
fn axis(p: f64, n: usize) -> (usize, usize, f64, bool) {
    let max = (n - 1) as f64;
    let live = p >= 0.0 && p <= max;
    let p = p.clamp(0.0, max);
    let lo = p.floor();
    let i0 = lo as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, p - lo, live)
}

/// Bilinear sample of every channel at continuous point `(x, y)` = (column, row).
/// Points outside the grid are clamped to the border per axis.
pub fn bilinear_sample<T: Scalar>(grid: &impl Raster<T>, x: f64, y: f64) -> Vec<f64> {
    let fp = Footprint::at(grid.height(), grid.width(), x, y);
    let c = grid.channels();
    (0..c).map(|ch| fp.sample(grid.data(), c, ch)).collect()
}
