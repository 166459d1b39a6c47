use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use x2car::camera::*;
use x2car::circular::circular_std;
use x2car::geom::{wrap_angle, EulerYPR, Vec3};
use x2car::sim::{generate, project_vp_hl, CameraSimSpec, RoutePlan, ScenarioSpec};

fn k() -> Intrinsics<f64> {
    Intrinsics::new(1000.0, 1000.0, 640.0, 360.0, 0.0).unwrap()
}

fn oracle_distance(l: &[f64; 3], p: &[f64; 3]) -> f64 {
    let dot = l[0] * p[0] + l[1] * p[1] + l[2] * p[2];
    let nl = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
    let np = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    dot.abs() / (nl * np)
}

fn line_through(rng: &mut ChaCha8Rng, p: (f64, f64)) -> LineSeg2D<f64> {
    let a = rng.random_range(0.0..std::f64::consts::PI);
    let (r1, r2) = (rng.random_range(50.0..400.0), rng.random_range(50.0..400.0));
    LineSeg2D::new(
        (p.0 + r1 * a.cos(), p.1 + r1 * a.sin()),
        (p.0 - r2 * a.cos(), p.1 - r2 * a.sin()),
    )
    .unwrap()
}

fn random_segment(rng: &mut ChaCha8Rng) -> LineSeg2D<f64> {
    loop {
        let p1 = (rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0));
        let p2 = (rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0));
        if let Ok(s) = LineSeg2D::new(p1, p2) {
            return s;
        }
    }
}

proptest! {
    #[test]
    fn optical_vp_round_trip(yaw in -0.5f64..0.5, pitch in -0.5f64..0.5) {
        // Unit direction with asin(r2) = yaw and -atan(r1/r3) = pitch.
        let d = Vec3::new(-yaw.cos() * pitch.sin(), yaw.sin(), yaw.cos() * pitch.cos());
        let vp = k().project(&d).unwrap();
        let (y, p) = vp_to_yaw_pitch(vp, &k()).unwrap();
        prop_assert!((y - yaw).abs() < 1e-9);
        prop_assert!((p - pitch).abs() < 1e-9);
    }

    #[test]
    fn mount_round_trip(yaw in -0.5f64..0.5, pitch in -0.5f64..0.5, roll in -0.5f64..0.5) {
        let mount = EulerYPR::new(yaw, pitch, roll);
        let (vp, hl) = project_vp_hl(&k(), &mount.to_matrix(), &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let e = frame_mount(&VPObservation { t: 0.0, vp, hl_theta: hl }, &k()).unwrap();
        prop_assert!((e.yaw - yaw).abs() < 1e-9);
        prop_assert!((e.pitch - pitch).abs() < 1e-9);
        prop_assert!((e.roll - roll).abs() < 1e-9);
    }

    #[test]
    fn distance_scale_invariant(
        l in prop::array::uniform3(-1e3f64..1e3),
        p in prop::array::uniform3(-1e3f64..1e3),
        s in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
    ) {
        prop_assume!(l.iter().map(|v| v * v).sum::<f64>() > 1e-6 && p.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let d = line_vp_distance(&l, &p).unwrap();
        let ls = [l[0] * s, l[1] * s, l[2] * s];
        let ps = [p[0] * s, p[1] * s, p[2] * s];
        prop_assert!((line_vp_distance(&ls, &p).unwrap() - d).abs() < 1e-12);
        prop_assert!((line_vp_distance(&l, &ps).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn all_inlier_input_keeps_every_line(seed in 0u64..10_000, n in 3usize..30, u in 200.0f64..1000.0, v in 100.0f64..600.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lines: Vec<_> = (0..n).map(|_| line_through(&mut rng, (u, v))).collect();
        let c = estimate_vp_from_lines(&lines, 1e-3, 50, seed).unwrap();
        prop_assert_eq!(c.inlier_count, n);
    }

    #[test]
    fn gate_never_emits_above_threshold(seed in 0u64..10_000, sigma in 0.0005f64..0.01) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut gate = StabilityGate::new(20, 0.005).unwrap();
        let mut window: Vec<EulerYPR<f64>> = Vec::new();
        for i in 0..200 {
            let e = EulerYPR::new(0.1 + noise.sample(&mut rng), -0.05 + noise.sample(&mut rng), noise.sample(&mut rng));
            window.push(e);
            if window.len() > 20 {
                window.remove(0);
            }
            if let Some(est) = gate.push(i as f64, e) {
                for f in [|a: &EulerYPR<f64>| a.roll, |a: &EulerYPR<f64>| a.pitch, |a: &EulerYPR<f64>| a.yaw] {
                    let v: Vec<f64> = window.iter().map(f).collect();
                    prop_assert!(circular_std(&v).unwrap() <= 0.005);
                }
                prop_assert!(est.window_std <= 0.005);
            }
        }
    }
}

#[test]
fn classification_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vp = [640.0, 360.0, 1.0];
    let mut both = [0usize; 2];
    for _ in 0..20 {
        // Lines passing at varying pixel offsets from the VP.
        let off = rng.random_range(0.0..800.0);
        let seg = line_through(&mut rng, (640.0 + off, 360.0));
        let d = oracle_distance(&seg.homogeneous(), &vp);
        let expected = if d < 1e-3 {
            LineLabel::Passing
        } else {
            LineLabel::NotPassing
        };
        assert_eq!(classify_line(&seg, &vp, 1e-3), expected);
        both[(expected == LineLabel::Passing) as usize] += 1;
    }
    assert!(
        both[0] > 0 && both[1] > 0,
        "sample covers both labels: {both:?}"
    );
}

fn concurrent_scene(seed: u64, truth: (f64, f64)) -> Vec<LineSeg2D<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines: Vec<_> = (0..8).map(|_| line_through(&mut rng, truth)).collect();
    while lines.len() < 12 {
        let s = random_segment(&mut rng);
        if misses_disc(&s, truth, 500.0) {
            lines.push(s);
        }
    }
    lines
}

#[test]
fn concurrent_lines_with_outliers() {
    let truth = (700.0, 340.0);
    let c = estimate_vp_from_lines(&concurrent_scene(1, truth), 1e-3, 200, 9).unwrap();
    assert_eq!(c.inlier_count, 8);
    assert!((c.vp.0 - truth.0).hypot(c.vp.1 - truth.1) < 0.5);
}

#[test]
fn concurrent_lines_with_outliers_over_many_scenes() {
    // The pixel-space metric loosens for hypotheses far from the image
    // origin, so a distant intersection occasionally collects extra lines.
    let truth = (700.0, 340.0);
    let hits = (0..200u64)
        .filter(|&seed| {
            let c = estimate_vp_from_lines(&concurrent_scene(seed, truth), 1e-3, 200, 9).unwrap();
            c.inlier_count == 8 && (c.vp.0 - truth.0).hypot(c.vp.1 - truth.1) < 0.5
        })
        .count();
    assert!(hits >= 180, "{hits}/200");
}

#[test]
fn gate_step_blocks_emission_while_inside_window() {
    let n = 100;
    let mut gate = StabilityGate::new(n, 0.005).unwrap();
    let frames: Vec<EulerYPR<f64>> = (0..400)
        .map(|i| {
            if i < 150 {
                EulerYPR::new(0.02, 0.01, 0.0)
            } else {
                EulerYPR::new(0.12, 0.01, 0.0)
            }
        })
        .collect();
    for (i, e) in frames.iter().enumerate() {
        let out = gate.push(i as f64, *e);
        let expect = if i + 1 < n {
            false
        } else {
            let w = &frames[i + 1 - n..=i];
            [
                |a: &EulerYPR<f64>| a.roll,
                |a: &EulerYPR<f64>| a.pitch,
                |a: &EulerYPR<f64>| a.yaw,
            ]
            .iter()
            .all(|f| circular_std(&w.iter().map(f).collect::<Vec<_>>()).unwrap() <= 0.005)
        };
        assert_eq!(out.is_some(), expect, "frame {i}");
        if (150..249).contains(&i) {
            assert!(out.is_none());
        }
    }
}

#[test]
fn gate_emission_rate_under_small_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.001).unwrap();
    let mut gate = StabilityGate::new(100, 0.005).unwrap();
    let emitted = (0..1000)
        .filter(|&i| {
            let e = EulerYPR::new(
                noise.sample(&mut rng),
                noise.sample(&mut rng),
                noise.sample(&mut rng),
            );
            gate.push(i as f64, e).is_some()
        })
        .count();
    // Frames before the window fills cannot emit.
    assert!(emitted as f64 / 901.0 > 0.99, "{emitted}");
}

fn camera_obs(
    mount: EulerYPR<f64>,
    sigma_vp: f64,
    seconds: f64,
    seed: u64,
) -> Vec<VPObservation<f64>> {
    let mut spec = ScenarioSpec::new(RoutePlan::builder().straight(seconds, 10.0).build(), seed);
    spec.camera = Some(CameraSimSpec {
        mount,
        sigma_vp_px: sigma_vp,
        ..Default::default()
    });
    generate(&spec).unwrap().camera.unwrap()
}

#[test]
fn noiseless_stream_recovers_mount() {
    let mount = EulerYPR::from_degrees(2.0, -1.5, 0.8);
    let cal = calibrate_camera(
        &camera_obs(mount, 0.0, 30.0, 1),
        &k(),
        &CameraConfig::default(),
    )
    .unwrap();
    assert!(wrap_angle(cal.aggregate.yaw - mount.yaw).abs() < 1e-9);
    assert!(wrap_angle(cal.aggregate.pitch - mount.pitch).abs() < 1e-9);
    assert!(wrap_angle(cal.aggregate.roll - mount.roll).abs() < 1e-9);
    assert_eq!(cal.emissions.len(), 301 - 99);
}

#[test]
fn noisy_stream_within_tolerance() {
    let mount = EulerYPR::from_degrees(-3.0, 2.0, 1.0);
    let cal = calibrate_camera(
        &camera_obs(mount, 2.0, 60.0, 2),
        &k(),
        &CameraConfig::default(),
    )
    .unwrap();
    let tol = 0.2f64.to_radians();
    assert!(wrap_angle(cal.aggregate.yaw - mount.yaw).abs() < tol);
    assert!(wrap_angle(cal.aggregate.pitch - mount.pitch).abs() < tol);
}

#[test]
fn lines_pipeline_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let frames: Vec<(f64, Vec<LineSeg2D<f64>>)> = (0..5)
        .map(|i| {
            let mut lines: Vec<_> = (0..10)
                .map(|_| line_through(&mut rng, (650.0, 355.0)))
                .collect();
            lines.extend((0..10).map(|_| random_segment(&mut rng)));
            (i as f64 * 0.1, lines)
        })
        .collect();
    let cfg = CameraConfig::default();
    let a = observations_from_lines(&frames, &cfg, 4);
    let b = observations_from_lines(&frames, &cfg, 4);
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
}

/// Outlier lines keep clear of every point within `radius` of `c`, so no
/// hypothesis near the true VP can count them.
fn misses_disc(s: &LineSeg2D<f64>, c: (f64, f64), radius: f64) -> bool {
    let l = s.homogeneous();
    let mut r = 0.0;
    while r <= radius {
        for k in 0..64 {
            let a = k as f64 * std::f64::consts::TAU / 64.0;
            if oracle_distance(&l, &[c.0 + r * a.cos(), c.1 + r * a.sin(), 1.0]) < 2e-3 {
                return false;
            }
        }
        r += 10.0;
    }
    true
}
