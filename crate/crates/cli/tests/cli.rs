use std::path::Path;
use std::process::{Command, Output};

use dafi_core::io::{read_image, write_flo, write_image, write_pfm};
use dafi_core::metrics::MetricReport;
use dafi_core::{DepthMap, FlowField, Image};

fn dafi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dafi")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_scene(dir: &Path, extra: &[&str]) {
    let mut args = vec!["gen-scene", "--out", s(dir)];
    args.extend_from_slice(extra);
    let o = dafi(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn interpolate_args(dir: &Path, out: &Path) -> Vec<String> {
    let f = |n: &str| dir.join(n).to_str().unwrap().to_owned();
    [
        "interpolate",
        "--frame0",
        &f("frame0.png"),
        "--frame1",
        &f("frame1.png"),
        "--flow01",
        &f("flow01.flo"),
        "--flow10",
        &f("flow10.flo"),
        "--depth0",
        &f("depth0.pfm"),
        "--depth1",
        &f("depth1.pfm"),
        "--time",
        "0.5",
        "--out",
        s(out),
    ]
    .iter()
    .map(|a| a.to_string())
    .collect()
}

fn run_strings(args: &[String]) -> Output {
    dafi(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn static_scene_reproduces_frame0() {
    let dir = tempfile::tempdir().unwrap();
    gen_scene(dir.path(), &["--square-velocity", "0,0"]);
    let out = dir.path().join("out.png");
    let o = run_strings(&interpolate_args(dir.path(), &out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(&out).unwrap(),
        std::fs::read(dir.path().join("frame0.png")).unwrap()
    );
}

#[test]
fn interpolate_then_metrics_agree() {
    let dir = tempfile::tempdir().unwrap();
    gen_scene(dir.path(), &["--random", "--seed", "4"]);
    let out = dir.path().join("out.png");
    let diag = dir.path().join("diag");
    let mut args = interpolate_args(dir.path(), &out);
    args.extend(["--dump-diagnostics".to_string(), s(&diag).to_string()]);
    assert!(run_strings(&args).status.success());
    for name in ["flow_t0.flo", "flow_t1.flo", "holes_t0.pgm", "holes_t1.pgm"] {
        assert!(diag.join(name).is_file(), "{name}");
    }
    let gt = dir.path().join("frame_t.png");
    let o = dafi(&["metrics", "--pred", s(&out), "--gt", s(&gt)]);
    assert!(o.status.success());
    let line = String::from_utf8(o.stdout).unwrap();
    let expect = MetricReport::compute(&read_image(&out).unwrap(), &read_image(&gt).unwrap()).unwrap();
    assert_eq!(line.trim_end(), expect.to_string());
    let ie: f64 = line
        .split_whitespace()
        .nth(2)
        .unwrap()
        .trim_start_matches("ie=")
        .parse()
        .unwrap();
    assert!((ie - expect.ie).abs() <= 5e-7);
}

#[test]
fn missing_depth0_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.png");
    let args: Vec<String> = interpolate_args(dir.path(), &out);
    let i = args.iter().position(|a| a == "--depth0").unwrap();
    let args: Vec<String> = args[..i].iter().chain(&args[i + 2..]).cloned().collect();
    let o = run_strings(&args);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--depth0") && err.contains("Usage"), "{err}");
}

#[test]
fn exit_codes_for_io_time_and_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    gen_scene(dir.path(), &[]);
    let out = dir.path().join("out.png");

    let mut args = interpolate_args(dir.path(), &out);
    let i = args.iter().position(|a| a == "--frame1").unwrap();
    args[i + 1] = s(&dir.path().join("nope.png")).to_string();
    let o = run_strings(&args);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("interpolate: --frame1"));

    let mut args = interpolate_args(dir.path(), &out);
    let i = args.iter().position(|a| a == "--time").unwrap();
    args[i + 1] = "1.5".into();
    assert_eq!(run_strings(&args).status.code(), Some(2));

    let small = dir.path().join("small.pfm");
    write_pfm(&DepthMap::filled(8, 8, 2.0f32).unwrap(), &small).unwrap();
    let mut args = interpolate_args(dir.path(), &out);
    let i = args.iter().position(|a| a == "--depth1").unwrap();
    args[i + 1] = s(&small).to_string();
    let o = run_strings(&args);
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("input check") && err.contains("dimension mismatch"),
        "{err}"
    );
}

#[test]
fn metrics_on_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.png");
    let img = Image::from_fn(16, 20, 3, |r, c, ch| ((r * 13 + c * 7 + ch * 31) % 256) as f32 / 255.0).unwrap();
    write_image(&img, &p).unwrap();
    let o = dafi(&["metrics", "--pred", s(&p), "--gt", s(&p)]);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "psnr=100.000000 ssim=1.000000 ie=0.000000 nie=0.000000\n"
    );
}

#[test]
fn project_uniform_depths_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (h, w) = (20, 24);
    let flow = FlowField::from_fn(h, w, |r, c| {
        (
            ((r * 7 + c * 3) % 9) as f32 / 1.7 - 2.5,
            ((r * 5 + c * 11) % 7) as f32 / 1.3 - 2.0,
        )
    })
    .unwrap();
    let fp = dir.path().join("f.flo");
    write_flo(&flow, &fp).unwrap();
    let mut outputs = Vec::new();
    for (i, d) in [1.0f32, 0.37, 3.0, 250.0].iter().enumerate() {
        let dp = dir.path().join(format!("d{i}.pfm"));
        write_pfm(&DepthMap::filled(h, w, *d).unwrap(), &dp).unwrap();
        let out = dir.path().join(format!("p{i}.flo"));
        let holes = dir.path().join(format!("h{i}.pgm"));
        let o = dafi(&[
            "project",
            "--flow",
            s(&fp),
            "--depth",
            s(&dp),
            "--time",
            "0.6",
            "--out",
            s(&out),
            "--holes",
            s(&holes),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((std::fs::read(out).unwrap(), std::fs::read(holes).unwrap()));
    }
    assert!(outputs.windows(2).all(|p| p[0] == p[1]));
}

#[test]
fn warp_zero_flow_copies_source() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("s.ppm");
    let img = Image::from_fn(9, 11, 3, |r, c, ch| ((r * 17 + c * 5 + ch) % 256) as f32 / 255.0).unwrap();
    write_image(&img, &src).unwrap();
    let fp = dir.path().join("z.flo");
    write_flo(&FlowField::zeros(9, 11), &fp).unwrap();
    let out = dir.path().join("o.ppm");
    assert!(dafi(&["warp", "--source", s(&src), "--flow", s(&fp), "--out", s(&out)])
        .status
        .success());
    assert_eq!(std::fs::read(out).unwrap(), std::fs::read(src).unwrap());
}

#[test]
fn gradcheck_projection_seed_7() {
    let o = dafi(&["gradcheck", "--op", "projection", "--seed", "7"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let err: f64 = last.trim_start_matches("max_rel_err=").parse().unwrap();
    assert!(err < 1e-3, "{text}");
}

#[test]
fn gen_scene_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = dafi(&[
        "gen-scene",
        "--out",
        s(dir.path()),
        "--square-depth",
        "4",
        "--background-depth",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gen-scene"));
}
