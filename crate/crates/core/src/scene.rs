//! Synthetic two-layer scenes with exact ground truth.
//!
//! A textured background translates rigidly behind a nearer textured square.
//! Velocities are integral and `t·velocity` must be integral too, so the frame
//! at time `t` is rendered exactly rather than resampled. All intensities are
//! multiples of 1/255 so scenes survive an 8-bit round trip unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{DepthMap, FlowField, HoleMask, Image};

const BACKGROUND_CELL: i64 = 4;
const SQUARE_CELL: i64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    /// 1 or 3.
    pub channels: usize,
    pub square_size: usize,
    /// Top-left corner `(x, y)` of the square in frame 0.
    pub square_origin: (i64, i64),
    /// `(dx, dy)` pixels per frame.
    pub square_velocity: (i64, i64),
    pub background_velocity: (i64, i64),
    pub square_depth: f64,
    pub background_depth: f64,
    /// Mean intensity of the square texture.
    pub square_intensity: f64,
    pub seed: u64,
    pub t: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            height: 64,
            width: 64,
            channels: 3,
            square_size: 16,
            square_origin: (20, 24),
            square_velocity: (4, 2),
            background_velocity: (0, 0),
            square_depth: 1.0,
            background_depth: 4.0,
            square_intensity: 0.8,
            seed: 0,
            t: 0.5,
        }
    }
}

impl SceneConfig {
    /// A random valid scene at `t = 0.5`: a static background and a square
    /// moving by an even, nonzero integer velocity, with
    /// `background_depth = depth_ratio · square_depth`.
    pub fn random(seed: u64, height: usize, width: usize, depth_ratio: f64) -> SceneConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let even = |rng: &mut ChaCha8Rng, lim: i64| 2 * rng.random_range(-lim..=lim);
        let size = rng.random_range(8..=(height.min(width) / 4).max(8));
        let mut vs = (0, 0);
        while vs == (0, 0) {
            vs = (even(&mut rng, 2), even(&mut rng, 2));
        }
        // Keep the square inside the frame at t = 0, 0.5 and 1.
        let span = |len: usize, v: i64| {
            let lo = (-v).max(0);
            let hi = len as i64 - size as i64 - v.max(0);
            (lo, hi)
        };
        let (xl, xh) = span(width, vs.0);
        let (yl, yh) = span(height, vs.1);
        let square_depth = rng.random_range(0.5..2.0);
        SceneConfig {
            height,
            width,
            channels: 3,
            square_size: size,
            square_origin: (rng.random_range(xl..=xh), rng.random_range(yl..=yh)),
            square_velocity: vs,
            background_velocity: (0, 0),
            square_depth,
            background_depth: square_depth * depth_ratio,
            square_intensity: rng.random_range(0.3..0.7),
            seed,
            t: 0.5,
        }
    }

    /// Displacement `τ·v`, which must be integral.
    fn shift(&self, tau: f64, v: (i64, i64)) -> Result<(i64, i64)> {
        let one = |c: i64| {
            let s = tau * c as f64;
            if (s - s.round()).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("t·velocity = {s} is not an integer")));
            }
            Ok(s.round() as i64)
        };
        Ok((one(v.0)?, one(v.1)?))
    }

    fn square_at(&self, tau: f64) -> Result<(i64, i64)> {
        let (dx, dy) = self.shift(tau, self.square_velocity)?;
        Ok((self.square_origin.0 + dx, self.square_origin.1 + dy))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.height == 0 || self.width == 0 {
            return bad("empty frame".into());
        }
        if self.channels != 1 && self.channels != 3 {
            return bad(format!("channels {}", self.channels));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return bad(format!("t = {}", self.t));
        }
        if !(self.square_depth > 0.0 && self.square_depth.is_finite())
            || !(self.background_depth > 0.0 && self.background_depth.is_finite())
        {
            return bad("depths must be positive and finite".into());
        }
        if self.square_depth >= self.background_depth {
            return bad("square_depth must be smaller than background_depth".into());
        }
        if !(0.0..=1.0).contains(&self.square_intensity) {
            return bad(format!("square_intensity {}", self.square_intensity));
        }
        if self.square_size == 0 {
            return bad("square_size must be positive".into());
        }
        self.shift(self.t, self.background_velocity)?;
        let s = self.square_size as i64;
        for tau in [0.0, self.t, 1.0] {
            let (x, y) = self.square_at(tau)?;
            if x < 0 || y < 0 || x + s > self.width as i64 || y + s > self.height as i64 {
                return bad(format!("square leaves the frame at time {tau}"));
            }
        }
        Ok(())
    }
}

/// Frames, flows, depths and the occlusion mask of one scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub frame0: Image<f32>,
    pub frame1: Image<f32>,
    pub frame_t: Image<f32>,
    pub flow01: FlowField<f32>,
    pub flow10: FlowField<f32>,
    pub depth0: DepthMap<f32>,
    pub depth1: DepthMap<f32>,
    /// Pixels of `frame_t` where occlusion makes the interpolation ambiguous.
    /// See [`generate`].
    pub occlusion_t: HoleMask,
}

fn hash(seed: u64, a: i64, b: i64, c: u64) -> u64 {
    let mut z = seed
        ^ (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ c.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in [-1, 1) from a hash.
fn jitter(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn code(v: f64) -> f32 {
    ((v.clamp(0.0, 1.0) * 255.0).round() / 255.0) as f32
}

/// Checkered noise on the infinite background plane.
fn background_texture(seed: u64, x: i64, y: i64, ch: usize) -> f32 {
    let (cx, cy) = (x.div_euclid(BACKGROUND_CELL), y.div_euclid(BACKGROUND_CELL));
    let base = if (cx + cy).rem_euclid(2) == 0 { 0.38 } else { 0.58 };
    code(base + 0.08 * jitter(hash(seed, cx, cy, ch as u64)))
}

fn square_texture(seed: u64, mean: f64, x: i64, y: i64, ch: usize) -> f32 {
    let (cx, cy) = (x / SQUARE_CELL, y / SQUARE_CELL);
    code(mean + 0.06 * jitter(hash(seed ^ 0x5EED_5EED, cx, cy, ch as u64 + 7)))
}

struct Layout<'a> {
    cfg: &'a SceneConfig,
    size: i64,
}

impl Layout<'_> {
    fn in_square(&self, tau: f64, x: i64, y: i64) -> bool {
        let (sx, sy) = self.cfg.square_at(tau).expect("validated");
        x >= sx && y >= sy && x < sx + self.size && y < sy + self.size
    }

    fn in_frame(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.cfg.width as i64 && y < self.cfg.height as i64
    }

    /// Background plane coordinate seen at `(x, y)` at time `tau`.
    fn background_point(&self, tau: f64, x: i64, y: i64) -> (i64, i64) {
        let (dx, dy) = self.cfg.shift(tau, self.cfg.background_velocity).expect("validated");
        (x - dx, y - dy)
    }

    /// Is background plane point `p` visible (inside the frame and not behind the
    /// square) at time `tau`?
    fn background_visible(&self, tau: f64, p: (i64, i64)) -> bool {
        let (dx, dy) = self.cfg.shift(tau, self.cfg.background_velocity).expect("validated");
        let (x, y) = (p.0 + dx, p.1 + dy);
        self.in_frame(x, y) && !self.in_square(tau, x, y)
    }

    fn render(&self, tau: f64) -> Image<f32> {
        let cfg = self.cfg;
        let (sx, sy) = cfg.square_at(tau).expect("validated");
        Image::from_fn(cfg.height, cfg.width, cfg.channels, |r, c, ch| {
            let (x, y) = (c as i64, r as i64);
            if self.in_square(tau, x, y) {
                square_texture(cfg.seed, cfg.square_intensity, x - sx, y - sy, ch)
            } else {
                let (px, py) = self.background_point(tau, x, y);
                background_texture(cfg.seed, px, py, ch)
            }
        })
        .expect("finite texture")
    }
}

/// Renders a scene.
///
/// `occlusion_t` marks the pixels of the time-`t` frame whose content cannot be
/// recovered unambiguously from both inputs: background that is hidden behind
/// the square or outside the frame in at least one input frame, and square
/// pixels covering background that is visible in at least one input frame
/// (where square and background flows collide in the projection).
pub fn generate(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let lay = Layout {
        cfg,
        size: cfg.square_size as i64,
    };
    let (h, w) = (cfg.height, cfg.width);
    let vs = (cfg.square_velocity.0 as f32, cfg.square_velocity.1 as f32);
    let vb = (cfg.background_velocity.0 as f32, cfg.background_velocity.1 as f32);

    let flow01 = FlowField::from_fn(
        h,
        w,
        |r, c| {
            if lay.in_square(0.0, c as i64, r as i64) {
                vs
            } else {
                vb
            }
        },
    )?;
    let flow10 = FlowField::from_fn(h, w, |r, c| {
        if lay.in_square(1.0, c as i64, r as i64) {
            (-vs.0, -vs.1)
        } else {
            (-vb.0, -vb.1)
        }
    })?;
    let depth = |tau: f64| {
        let data = (0..h * w)
            .map(|i| {
                if lay.in_square(tau, (i % w) as i64, (i / w) as i64) {
                    cfg.square_depth as f32
                } else {
                    cfg.background_depth as f32
                }
            })
            .collect();
        DepthMap::new(h, w, data)
    };

    let mut mask = Vec::with_capacity(h * w);
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let p = lay.background_point(cfg.t, c, r);
            let seen0 = lay.background_visible(0.0, p);
            let seen1 = lay.background_visible(1.0, p);
            mask.push(if lay.in_square(cfg.t, c, r) {
                seen0 || seen1
            } else {
                !(seen0 && seen1)
            });
        }
    }

    Ok(Scene {
        frame0: lay.render(0.0),
        frame1: lay.render(1.0),
        frame_t: lay.render(cfg.t),
        flow01,
        flow10,
        depth0: depth(0.0)?,
        depth1: depth(1.0)?,
        occlusion_t: HoleMask::new(h, w, mask)?,
    })
}
