use approx::assert_abs_diff_eq;

use x2car::geom::{EulerYPR, RotMat3};
use x2car::io;
use x2car::sim::*;

fn full_spec(seed: u64) -> ScenarioSpec {
    let plan = RoutePlan::builder()
        .straight(10.0, 10.0)
        .turn(0.5, 60.0, 10.0)
        .straight(10.0, 10.0)
        .build();
    let mut s = ScenarioSpec::new(plan, seed);
    s.vehicle.turn_roll = true;
    s.gnss = Some(GnssSimSpec {
        mount_yaw: 0.02,
        sigma_yaw: 0.001,
        sigma_pos: 0.01,
        ..Default::default()
    });
    s.lidar = Some(LidarSimSpec {
        mount: EulerYPR::from_degrees(1.0, 2.0, 3.0),
        points_per_frame: 50,
        sigma_point: 0.01,
        clutter_fraction: 0.2,
        ..Default::default()
    });
    s.radar = Some(RadarSimSpec {
        mount_yaw: 0.1,
        sigma_doppler: 0.1,
        movers: 2,
        outlier_fraction: 0.05,
        ..Default::default()
    });
    s.camera = Some(CameraSimSpec {
        mount: EulerYPR::from_degrees(0.5, -1.0, 0.3),
        sigma_vp_px: 1.0,
        sigma_hl: 0.001,
        ..Default::default()
    });
    s
}

#[test]
fn mixed_plan_matches_closed_form() {
    let plan = RoutePlan::builder()
        .origin(3.0, -2.0, 0.3)
        .straight(10.0, 8.0)
        .arc(20.0, 10.0, 0.05)
        .straight(5.0, 12.0)
        .arc(10.0, 6.0, -0.1)
        .build();
    let route = Route::new(plan).unwrap();
    // Hand concatenation of the four primitives.
    let (mut x, mut y, mut h): (f64, f64, f64) = (3.0, -2.0, 0.3);
    let check = |t: f64, x: f64, y: f64, h: f64| {
        let s = route.state_at(t);
        assert_abs_diff_eq!(s.x, x, epsilon = 1e-9);
        assert_abs_diff_eq!(s.y, y, epsilon = 1e-9);
        assert_abs_diff_eq!(s.heading, h, epsilon = 1e-12);
    };
    x += 80.0 * h.cos();
    y += 80.0 * h.sin();
    check(10.0, x, y, h);
    let r: f64 = 10.0 / 0.05;
    let h1 = h + 0.05 * 20.0;
    x += r * (h1.sin() - h.sin());
    y -= r * (h1.cos() - h.cos());
    h = h1;
    check(30.0, x, y, h);
    x += 60.0 * h.cos();
    y += 60.0 * h.sin();
    check(35.0, x, y, h);
    let r = 6.0 / -0.1;
    let h1 = h - 0.1 * 10.0;
    x += r * (h1.sin() - h.sin());
    y -= r * (h1.cos() - h.cos());
    check(45.0, x, y, h1);
}

#[test]
fn gnss_heading_noise_has_declared_std() {
    let mut s = ScenarioSpec::new(RoutePlan::builder().straight(1000.0, 10.0).build(), 3);
    s.gnss = Some(GnssSimSpec {
        sigma_yaw: 0.01,
        ..Default::default()
    });
    let poses = generate(&s).unwrap().gnss_poses.unwrap();
    let e: Vec<f64> = poses.iter().map(|p| p.rotation.forward_heading()).collect();
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let std = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((std / 0.01 - 1.0).abs() < 0.05, "{std}");
    assert!(mean.abs() < 4.0 * 0.01 / n.sqrt());
}

#[test]
fn generation_is_reproducible() {
    let a = generate(&full_spec(9)).unwrap();
    let b = generate(&full_spec(9)).unwrap();
    assert_eq!(a.gnss_poses, b.gnss_poses);
    assert_eq!(a.lidar, b.lidar);
    assert_eq!(a.radar, b.radar);
    assert_eq!(a.camera, b.camera);
    assert_eq!(a.landmarks, b.landmarks);
    let c = generate(&full_spec(10)).unwrap();
    assert_ne!(a.radar, c.radar);
}

fn rot_close(a: &RotMat3<f64>, b: &RotMat3<f64>) -> bool {
    (0..3).all(|i| (a.row(i) - b.row(i)).norm() < 1e-14)
}

#[test]
fn written_files_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let sc = generate(&full_spec(4)).unwrap();

    let gnss = sc.gnss_poses.unwrap();
    let p = dir.path().join("gnss.csv");
    io::write_poses(&p, &gnss).unwrap();
    let back = io::read_poses(&p).unwrap();
    assert_eq!(back.len(), gnss.len());
    for (a, b) in gnss.iter().zip(&back) {
        assert_eq!((a.t, a.position), (b.t, b.position));
        assert!(rot_close(&a.rotation, &b.rotation));
    }

    let (_, clouds) = sc.lidar.unwrap();
    io::write_clouds(&dir.path().join("clouds"), &clouds).unwrap();
    assert_eq!(io::read_clouds(&dir.path().join("clouds")).unwrap(), clouds);

    let radar = sc.radar.unwrap();
    let p = dir.path().join("radar.csv");
    io::write_radar(&p, &radar).unwrap();
    assert_eq!(io::read_radar(&p).unwrap(), radar);

    let vp = sc.camera.unwrap();
    let p = dir.path().join("vp.csv");
    io::write_vp(&p, &vp).unwrap();
    assert_eq!(io::read_vp(&p).unwrap(), vp);

    let k = full_spec(4).camera.unwrap().intrinsics;
    let p = dir.path().join("k.toml");
    io::write_intrinsics(&p, &k).unwrap();
    assert_eq!(io::read_intrinsics(&p).unwrap(), k);

    let p = dir.path().join("truth.json");
    io::write_json(&p, &sc.truth).unwrap();
    let t: Truth = io::read_json(&p).unwrap();
    assert_eq!(t, sc.truth);
}

#[test]
fn scenario_spec_round_trips_through_toml() {
    let spec = full_spec(5);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("scenario.toml");
    std::fs::write(&p, toml::to_string(&spec).unwrap()).unwrap();
    assert_eq!(io::read_scenario(&p).unwrap(), spec);
}

#[test]
fn empty_streams_write_headers() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("radar.csv");
    io::write_radar(&p, &[]).unwrap();
    assert!(io::read_radar(&p).unwrap().is_empty());
    let p = dir.path().join("poses.csv");
    io::write_poses(&p, &[]).unwrap();
    assert!(io::read_poses(&p).unwrap().is_empty());
}

#[test]
fn noiseless_oracle_closure() {
    let plan = RoutePlan::builder().straight(30.0, 10.0).build();
    let mut s = ScenarioSpec::new(plan, 6);
    s.gnss = Some(GnssSimSpec {
        mount_yaw: 0.03,
        ..Default::default()
    });
    s.radar = Some(RadarSimSpec {
        mount_yaw: 0.07,
        landmarks: LandmarkSpec {
            count: 200,
            ..Default::default()
        },
        ..Default::default()
    });
    s.camera = Some(CameraSimSpec {
        mount: EulerYPR::new(0.02, -0.01, 0.015),
        ..Default::default()
    });
    let sc = generate(&s).unwrap();

    let samples: Vec<_> = sc
        .gnss_poses
        .unwrap()
        .iter()
        .map(|p| p.to_sample())
        .collect();
    let g = x2car::gnss::gnss_yaw_offset(&samples, &Default::default()).unwrap();
    assert_abs_diff_eq!(g.yaw_offset, 0.03, epsilon = 1e-4);

    let radar = sc.radar.unwrap();
    let v = x2car::radar::calibrate_radar_velocity(&radar, &Default::default()).unwrap();
    assert_abs_diff_eq!(v.yaw, 0.07, epsilon = 1e-4);
    let p = x2car::radar::calibrate_radar_position(&radar, &Default::default()).unwrap();
    assert_abs_diff_eq!(p.yaw, 0.07, epsilon = 1e-4);

    let k = s.camera.as_ref().unwrap().intrinsics;
    let c = x2car::camera::calibrate_camera(&sc.camera.unwrap(), &k, &Default::default()).unwrap();
    assert_abs_diff_eq!(c.aggregate.yaw, 0.02, epsilon = 1e-4);
    assert_abs_diff_eq!(c.aggregate.pitch, -0.01, epsilon = 1e-4);
    assert_abs_diff_eq!(c.aggregate.roll, 0.015, epsilon = 1e-4);
}
