//! Projection checked against a brute-force evaluator that visits every
//! (target, source) pair and tests the landing predicate directly.

use dafi_core::{contributor_sets, fill_holes, project_flow, project_flow_backward, DepthMap, FlowField};
use proptest::prelude::*;

/// Direct evaluation: for each target, scan every source pixel.
fn brute_force(flow: &[f64], depth: &[f64], h: usize, w: usize, t: f64, scale: f64) -> Vec<Option<(f64, f64)>> {
    let mut out = Vec::with_capacity(h * w);
    for xr in 0..h {
        for xc in 0..w {
            let (mut sw, mut su, mut sv) = (0.0, 0.0, 0.0);
            for yr in 0..h {
                for yc in 0..w {
                    let i = yr * w + yc;
                    let (u, v) = (flow[2 * i], flow[2 * i + 1]);
                    let lx = (yc as f64 + t * u).round();
                    let ly = (yr as f64 + t * v).round();
                    if lx == xc as f64 && ly == xr as f64 {
                        let wt = 1.0 / depth[i];
                        sw += wt;
                        su += wt * u;
                        sv += wt * v;
                    }
                }
            }
            out.push((sw > 0.0).then(|| (scale * su / sw, scale * sv / sw)));
        }
    }
    out
}

fn unweighted(flow: &[f64], h: usize, w: usize, t: f64, scale: f64) -> Vec<Option<(f64, f64)>> {
    brute_force(flow, &vec![1.0; h * w], h, w, t, scale)
}

fn instance() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, f64)> {
    (1usize..=16, 1usize..=16).prop_flat_map(|(h, w)| {
        (
            Just(h),
            Just(w),
            proptest::collection::vec(-6.0f64..6.0, 2 * h * w),
            proptest::collection::vec(0.1f64..10.0, h * w),
            0.0f64..=1.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force((h, w, flow, depth, t) in instance()) {
        let f = FlowField::new(h, w, flow.clone()).unwrap();
        let d = DepthMap::new(h, w, depth.clone()).unwrap();
        let p = project_flow(&f, &d, t, -t).unwrap();
        let oracle = brute_force(&flow, &depth, h, w, t, -t);
        for (i, o) in oracle.iter().enumerate() {
            match o {
                Some((u, v)) => {
                    prop_assert!(!p.holes.data()[i]);
                    prop_assert!((p.flow.data()[2 * i] - u).abs() <= 1e-5);
                    prop_assert!((p.flow.data()[2 * i + 1] - v).abs() <= 1e-5);
                }
                None => {
                    prop_assert!(p.holes.data()[i]);
                    prop_assert_eq!(p.weight_sum[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn uniform_depth_is_unweighted((h, w, flow, _depth, t) in instance(), c in 0.01f64..100.0) {
        let f = FlowField::new(h, w, flow.clone()).unwrap();
        let d = DepthMap::filled(h, w, c).unwrap();
        let p = project_flow(&f, &d, t, -t).unwrap();
        for (i, o) in unweighted(&flow, h, w, t, -t).iter().enumerate() {
            if let Some((u, v)) = o {
                prop_assert!((p.flow.data()[2 * i] - u).abs() <= 1e-6);
                prop_assert!((p.flow.data()[2 * i + 1] - v).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn depth_scale_invariance((h, w, flow, depth, t) in instance(), lambda in 0.01f64..100.0) {
        let f = FlowField::new(h, w, flow).unwrap();
        let d = DepthMap::new(h, w, depth.clone()).unwrap();
        let scaled = DepthMap::new(h, w, depth.iter().map(|v| v * lambda).collect()).unwrap();
        let a = fill_holes(&project_flow(&f, &d, t, -t).unwrap());
        let b = fill_holes(&project_flow(&f, &scaled, t, -t).unwrap());
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn holes_iff_zero_weight((h, w, flow, depth, t) in instance()) {
        let p = project_flow(
            &FlowField::new(h, w, flow).unwrap(),
            &DepthMap::new(h, w, depth).unwrap(),
            t,
            -(1.0 - t),
        ).unwrap();
        for (hole, sw) in p.holes.data().iter().zip(&p.weight_sum) {
            prop_assert_eq!(*hole, *sw == 0.0);
        }
        prop_assert!(p.flow.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn contributor_membership((h, w, flow, _d, t) in instance()) {
        let f = FlowField::new(h, w, flow.clone()).unwrap();
        let sets = contributor_sets(&f, t).unwrap();
        let mut seen = vec![0usize; h * w];
        for r in 0..h {
            for c in 0..w {
                for (yr, yc) in sets.sources(r, c) {
                    let i = yr * w + yc;
                    prop_assert_eq!((yc as f64 + t * flow[2 * i]).round(), c as f64);
                    prop_assert_eq!((yr as f64 + t * flow[2 * i + 1]).round(), r as f64);
                    seen[i] += 1;
                }
            }
        }
        prop_assert!(seen.iter().all(|&n| n <= 1));
    }

    #[test]
    fn depth_dominance(
        k in 1.0f64..1000.0,
        d in 0.1f64..10.0,
        near in (0.6f64..1.4, 0.6f64..1.4),
        far in (-1.4f64..-0.6, -1.4f64..-0.6),
        t in 0.05f64..1.0,
    ) {
        // 3×3 grid: (0,0) and (2,2) both land on (1,1), the rest leave the frame.
        let mut flow = vec![100.0; 18];
        let f_near = (near.0 / t, near.1 / t);
        let f_far = (far.0 / t, far.1 / t);
        flow[0] = f_near.0;
        flow[1] = f_near.1;
        flow[16] = f_far.0;
        flow[17] = f_far.1;
        let mut depth = vec![1.0; 9];
        depth[0] = d;
        depth[8] = k * d;
        let p = project_flow(&FlowField::new(3, 3, flow).unwrap(), &DepthMap::new(3, 3, depth).unwrap(), t, -t).unwrap();
        let (u, v) = p.flow.get(1, 1);
        let bound = |a: f64, b: f64| t * (b - a).abs() / (k + 1.0) * (1.0 + 1e-12) + 1e-12;
        prop_assert!((u - -t * f_near.0).abs() <= bound(f_near.0, f_far.0));
        prop_assert!((v - -t * f_near.1).abs() <= bound(f_near.1, f_far.1));
    }
}

#[test]
fn backward_matches_example_case_by_hand() {
    // 1×3: ends collide at the centre, middle leaves the frame.
    let f = FlowField::new(1, 3, vec![2.0f64, 0.0, 0.0, 10.0, -2.0, 0.0]).unwrap();
    let d = DepthMap::new(1, 3, vec![1.0, 5.0, 2.0]).unwrap();
    // Upstream only on the centre's u component. Holes at both ends average
    // the centre, so their upstream (zero here) adds nothing.
    let g = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let grads = project_flow_backward(&f, &d, 0.5, -0.5, &g).unwrap();
    // out = -0.5·(w0·2 + w2·(-2)) / (w0 + w2), w0 = 1, w2 = 0.5.
    assert!((grads.flow[0] - (-0.5 * 1.0 / 1.5)).abs() < 1e-15);
    assert!((grads.flow[4] - (-0.5 * 0.5 / 1.5)).abs() < 1e-15);
    // d out / d D0 = -0.5 · (2 - 2/3)/1.5 · (-1) = 4/9.
    assert!((grads.depth[0] - 4.0 / 9.0).abs() < 1e-15, "{}", grads.depth[0]);
    // d out / d D2 = -0.5 · (-2 - 2/3)/1.5 · (-1/4) = -2/9.
    assert!((grads.depth[2] - -2.0 / 9.0).abs() < 1e-15, "{}", grads.depth[2]);
    assert_eq!(grads.depth[1], 0.0);
}

#[test]
fn determinism_across_thread_counts() {
    let (h, w) = (48, 40);
    let flow: Vec<f32> = (0..2 * h * w)
        .map(|i| (((i * 7919) % 97) as f32 - 48.0) / 9.0)
        .collect();
    let depth: Vec<f32> = (0..h * w).map(|i| 0.5 + ((i * 31) % 17) as f32).collect();
    let f = FlowField::new(h, w, flow).unwrap();
    let d = DepthMap::new(h, w, depth).unwrap();
    let run = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| {
            let p = project_flow(&f, &d, 0.37, -0.37).unwrap();
            (fill_holes(&p), p.weight_sum)
        })
    };
    let (a, wa) = run(1);
    for n in [2, 3, 8] {
        let (b, wb) = run(n);
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(wa.iter().zip(&wb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
