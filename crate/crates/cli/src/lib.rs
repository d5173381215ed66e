//! Command implementations behind the `dafi` binary.
//!
//! Exit codes: 0 success, 2 bad flags or argument values, 3 unreadable,
//! unwritable or invalid files, 4 inputs whose dimensions disagree.

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dafi_core::gradcheck::{check_charbonnier, check_projection, check_warp, GradCheck};
use dafi_core::io::{
    read_feature_map, read_flo, read_image, read_kernel_field, read_pfm, write_flo, write_image, write_mask, write_pfm,
};
use dafi_core::metrics::MetricReport;
use dafi_core::scene::{generate, SceneConfig};
use dafi_core::{
    adaptive_warp, fill_holes, interpolate_frame, project_flow, Error, FeatureMap, FramePair, KernelField, ZeroResidual,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIMENSIONS: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dafi", version, about = "Depth-aware frame interpolation operators")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the frame at time t between two frames.
    Interpolate(InterpolateArgs),
    /// Project a flow field to time t and fill its holes.
    Project(ProjectArgs),
    /// Warp an image by a flow field through per-pixel kernels.
    Warp(WarpArgs),
    /// Compare an image against ground truth.
    Metrics(MetricsArgs),
    /// Render a synthetic two-layer scene with ground truth.
    GenScene(GenSceneArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub frame0: PathBuf,
    #[arg(long)]
    pub frame1: PathBuf,
    /// Flow from frame 0 to frame 1 (.flo).
    #[arg(long)]
    pub flow01: PathBuf,
    /// Flow from frame 1 to frame 0 (.flo).
    #[arg(long)]
    pub flow10: PathBuf,
    /// Depth of frame 0 (.pfm).
    #[arg(long)]
    pub depth0: PathBuf,
    #[arg(long)]
    pub depth1: PathBuf,
    #[arg(long)]
    pub time: f64,
    /// Kernel field container; delta kernels when absent.
    #[arg(long)]
    pub kernels: Option<PathBuf>,
    /// Feature container for frame 0; a single zero channel when absent.
    #[arg(long, requires = "context1")]
    pub context0: Option<PathBuf>,
    #[arg(long, requires = "context0")]
    pub context1: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write intermediate flows (.flo) and hole masks (.pgm) here.
    #[arg(long)]
    pub dump_diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub flow: PathBuf,
    #[arg(long)]
    pub depth: PathBuf,
    /// Fraction of its flow each pixel travels.
    #[arg(long)]
    pub time: f64,
    /// Multiplier of the averaged flow; defaults to -time.
    #[arg(long, allow_hyphen_values = true)]
    pub scale: Option<f64>,
    /// Filled projected flow (.flo).
    #[arg(long)]
    pub out: PathBuf,
    /// Hole mask before filling (.pgm).
    #[arg(long)]
    pub holes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WarpArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub flow: PathBuf,
    #[arg(long)]
    pub kernels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenSceneArgs {
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw size, motion and depths from the seed instead of the flags below.
    #[arg(long)]
    pub random: bool,
    /// background_depth / square_depth for --random.
    #[arg(long, default_value_t = 4.0)]
    pub depth_ratio: f64,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub channels: usize,
    #[arg(long, default_value_t = 16)]
    pub square_size: usize,
    /// Top-left corner in frame 0, as x,y.
    #[arg(long, value_parser = parse_pair, default_value = "20,24", allow_hyphen_values = true)]
    pub square_origin: (i64, i64),
    /// Pixels per frame, as dx,dy.
    #[arg(long, value_parser = parse_pair, default_value = "4,2", allow_hyphen_values = true)]
    pub square_velocity: (i64, i64),
    #[arg(long, value_parser = parse_pair, default_value = "0,0", allow_hyphen_values = true)]
    pub background_velocity: (i64, i64),
    #[arg(long, default_value_t = 1.0)]
    pub square_depth: f64,
    #[arg(long, default_value_t = 4.0)]
    pub background_depth: f64,
    #[arg(long, default_value_t = 0.8)]
    pub square_intensity: f64,
    #[arg(long, default_value_t = 0.5)]
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GradOp {
    Projection,
    Warp,
    Charbonnier,
    All,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = GradOp::All)]
    pub op: GradOp,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random instances, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
}

fn parse_pair(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected a,b, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

/// A failed command: exit code plus the message printed to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::DimensionMismatch { .. } => EXIT_DIMENSIONS,
        Error::InvalidTime(_) | Error::InvalidArgument(_) | Error::InvalidConfig(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn fail(stage: impl Display, err: Error) -> Failure {
    Failure {
        code: exit_code(&err),
        message: format!("{stage}: {err}"),
    }
}

/// Wraps a loader or writer so its errors name the flag and path involved.
fn at<T>(stage: &str, flag: &str, path: &Path, r: dafi_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| fail(format_args!("{stage}: {flag} {}", path.display()), e))
}

fn kernels_or_delta(stage: &str, path: Option<&Path>, h: usize, w: usize) -> Result<KernelField, Failure> {
    match path {
        Some(p) => at(stage, "--kernels", p, read_kernel_field(p)),
        None => Ok(KernelField::delta(h, w)),
    }
}

fn create_dir(stage: &str, dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| fail(format_args!("{stage}: create {}", dir.display()), e.into()))
}

pub fn cmd_interpolate(a: &InterpolateArgs) -> Result<(), Failure> {
    let s = "interpolate";
    let frame0 = at(s, "--frame0", &a.frame0, read_image(&a.frame0))?;
    let frame1 = at(s, "--frame1", &a.frame1, read_image(&a.frame1))?;
    let flow01 = at(s, "--flow01", &a.flow01, read_flo(&a.flow01))?;
    let flow10 = at(s, "--flow10", &a.flow10, read_flo(&a.flow10))?;
    let depth0 = at(s, "--depth0", &a.depth0, read_pfm(&a.depth0))?;
    let depth1 = at(s, "--depth1", &a.depth1, read_pfm(&a.depth1))?;
    let (h, w) = (frame0.height(), frame0.width());
    let kernels = kernels_or_delta(s, a.kernels.as_deref(), h, w)?;
    let (context0, context1) = match (&a.context0, &a.context1) {
        (Some(p0), Some(p1)) => (
            at(s, "--context0", p0, read_feature_map(p0))?,
            at(s, "--context1", p1, read_feature_map(p1))?,
        ),
        _ => {
            let z = FeatureMap::zeros(h, w, 1).map_err(|e| fail(s, e))?;
            (z.clone(), z)
        }
    };
    let pair = FramePair {
        frame0: &frame0,
        frame1: &frame1,
        flow01: &flow01,
        flow10: &flow10,
        depth0: &depth0,
        depth1: &depth1,
        context0: &context0,
        context1: &context1,
        kernels: &kernels,
    };
    let result = interpolate_frame(&pair, a.time, &ZeroResidual).map_err(|e| fail(s, e))?;
    at(s, "--out", &a.out, write_image(&result.frame, &a.out))?;

    if let Some(dir) = &a.dump_diagnostics {
        create_dir(s, dir)?;
        let flag = "--dump-diagnostics";
        let p = dir.join("flow_t0.flo");
        at(s, flag, &p, write_flo(&result.flow_t0, &p))?;
        let p = dir.join("flow_t1.flo");
        at(s, flag, &p, write_flo(&result.flow_t1, &p))?;
        let p = dir.join("holes_t0.pgm");
        at(s, flag, &p, write_mask(&result.projected_t0.holes, &p))?;
        let p = dir.join("holes_t1.pgm");
        at(s, flag, &p, write_mask(&result.projected_t1.holes, &p))?;
    }
    Ok(())
}

pub fn cmd_project(a: &ProjectArgs) -> Result<(), Failure> {
    let s = "project";
    let flow = at(s, "--flow", &a.flow, read_flo(&a.flow))?;
    let depth = at(s, "--depth", &a.depth, read_pfm(&a.depth))?;
    let scale = a.scale.unwrap_or(-a.time);
    let projected = project_flow(&flow, &depth, a.time, scale).map_err(|e| fail(s, e))?;
    at(s, "--out", &a.out, write_flo(&fill_holes(&projected), &a.out))?;
    if let Some(p) = &a.holes {
        at(s, "--holes", p, write_mask(&projected.holes, p))?;
    }
    Ok(())
}

pub fn cmd_warp(a: &WarpArgs) -> Result<(), Failure> {
    let s = "warp";
    let source = at(s, "--source", &a.source, read_image(&a.source))?;
    let flow = at(s, "--flow", &a.flow, read_flo(&a.flow))?;
    let kernels = kernels_or_delta(s, a.kernels.as_deref(), source.height(), source.width())?;
    let out = adaptive_warp(&source, &flow, &kernels).map_err(|e| fail(s, e))?;
    at(s, "--out", &a.out, write_image(&out, &a.out))
}

pub fn cmd_metrics(a: &MetricsArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let s = "metrics";
    let pred = at(s, "--pred", &a.pred, read_image(&a.pred))?;
    let gt = at(s, "--gt", &a.gt, read_image(&a.gt))?;
    let report = MetricReport::compute(&pred, &gt).map_err(|e| fail(s, e))?;
    writeln!(out, "{report}").map_err(|e| fail(s, e.into()))
}

fn scene_config(a: &GenSceneArgs) -> SceneConfig {
    if a.random {
        return SceneConfig::random(a.seed, a.height, a.width, a.depth_ratio);
    }
    SceneConfig {
        height: a.height,
        width: a.width,
        channels: a.channels,
        square_size: a.square_size,
        square_origin: a.square_origin,
        square_velocity: a.square_velocity,
        background_velocity: a.background_velocity,
        square_depth: a.square_depth,
        background_depth: a.background_depth,
        square_intensity: a.square_intensity,
        seed: a.seed,
        t: a.time,
    }
}

pub fn cmd_gen_scene(a: &GenSceneArgs) -> Result<(), Failure> {
    let s = "gen-scene";
    let scene = generate(&scene_config(a)).map_err(|e| fail(s, e))?;
    create_dir(s, &a.out)?;
    let flag = "--out";
    let path = |name: &str| a.out.join(name);
    for (name, img) in [
        ("frame0.png", &scene.frame0),
        ("frame1.png", &scene.frame1),
        ("frame_t.png", &scene.frame_t),
    ] {
        at(s, flag, &path(name), write_image(img, path(name)))?;
    }
    at(
        s,
        flag,
        &path("flow01.flo"),
        write_flo(&scene.flow01, path("flow01.flo")),
    )?;
    at(
        s,
        flag,
        &path("flow10.flo"),
        write_flo(&scene.flow10, path("flow10.flo")),
    )?;
    at(
        s,
        flag,
        &path("depth0.pfm"),
        write_pfm(&scene.depth0, path("depth0.pfm")),
    )?;
    at(
        s,
        flag,
        &path("depth1.pfm"),
        write_pfm(&scene.depth1, path("depth1.pfm")),
    )?;
    at(
        s,
        flag,
        &path("occlusion_t.pgm"),
        write_mask(&scene.occlusion_t, path("occlusion_t.pgm")),
    )
}

type CheckFn = fn(u64) -> dafi_core::Result<Vec<GradCheck>>;

pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let s = "gradcheck";
    let ops: &[CheckFn] = match a.op {
        GradOp::Projection => &[check_projection],
        GradOp::Warp => &[check_warp],
        GradOp::Charbonnier => &[check_charbonnier],
        GradOp::All => &[check_projection, check_warp, check_charbonnier],
    };
    let mut worst: Vec<GradCheck> = Vec::new();
    for seed in a.seed..a.seed.saturating_add(a.trials.max(1)) {
        for op in ops {
            for c in op(seed).map_err(|e| fail(s, e))? {
                match worst
                    .iter_mut()
                    .find(|w| w.operator == c.operator && w.input == c.input)
                {
                    Some(w) if w.max_rel_error < c.max_rel_error => *w = c,
                    Some(_) => {}
                    None => worst.push(c),
                }
            }
        }
    }
    let overall = worst.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let mut text = String::new();
    for c in &worst {
        text.push_str(&format!("{c}\n"));
    }
    text.push_str(&format!("max_rel_err={overall:.3e}\n"));
    out.write_all(text.as_bytes()).map_err(|e| fail(s, e.into()))
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Interpolate(a) => cmd_interpolate(a),
        Command::Project(a) => cmd_project(a),
        Command::Warp(a) => cmd_warp(a),
        Command::Metrics(a) => cmd_metrics(a, out),
        Command::GenScene(a) => cmd_gen_scene(a),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
    }
}

/// Parses `args`, runs the command on a pool of `--threads` workers and
/// returns the process exit code. Diagnostics go to `err`.
pub fn run<I, A>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    // Report text is buffered so the command can run inside the pool.
    let mut buf = Vec::new();
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(|| execute(&cli, &mut buf)),
            Err(e) => Err(Failure {
                code: EXIT_USAGE,
                message: format!("--threads {n}: {e}"),
            }),
        },
        None => execute(&cli, &mut buf),
    };
    let _ = out.write_all(&buf);
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "dafi: {f}");
            f.code
        }
    }
}
