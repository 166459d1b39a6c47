use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use x2car::geom::EulerYPR;
use x2car::sim::{GnssSimSpec, LandmarkSpec, LidarSimSpec, RadarSimSpec, RoutePlan, ScenarioSpec};

fn x2car(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_x2car"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn simulate(dir: &Path, spec: &ScenarioSpec) -> PathBuf {
    let scenario = dir.join("scenario_in.toml");
    std::fs::write(&scenario, toml::to_string(spec).unwrap()).unwrap();
    let out = dir.join("sim");
    let o = x2car(&["simulate", "--scenario", s(&scenario), "--output", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn gnss_spec(minutes: usize, sigma_yaw: f64) -> ScenarioSpec {
    let mut plan = RoutePlan::builder();
    for _ in 0..minutes {
        plan = plan
            .straight(20.0, 10.0)
            .arc(10.0, 10.0, 0.03)
            .straight(20.0, 10.0)
            .arc(10.0, 10.0, -0.03);
    }
    let mut spec = ScenarioSpec::new(plan.build(), 11);
    spec.gnss = Some(GnssSimSpec {
        mount_yaw: 2f64.to_radians(),
        sigma_yaw,
        ..Default::default()
    });
    spec
}

#[test]
fn simulate_then_gnss_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &gnss_spec(2, 0.1f64.to_radians()));
    let report = dir.path().join("gnss.json");
    let o = x2car(&[
        "gnss",
        "--poses",
        s(&sim.join("gnss_poses.csv")),
        "--output",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let r = read_json(&report);
    let truth = read_json(&sim.join("truth.json"));
    let yaw = r["result"]["yaw"]["rad"].as_f64().unwrap();
    let want = truth["gnss"]["yaw"].as_f64().unwrap();
    assert!((yaw - want).abs() < 0.05f64.to_radians(), "{yaw} vs {want}");
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["status"], "ok");
    assert!((r["result"]["yaw"]["deg"].as_f64().unwrap() - yaw.to_degrees()).abs() < 1e-12);
    // Full parameter set, defaults included.
    let gates = x2car::gnss::GnssConfig::<f64>::default().heading.gates;
    assert_eq!(
        r["params"]["gnss"]["heading"]["gates"]["v_min_sq"],
        gates.v_min_sq
    );
    assert_eq!(r["params"]["consistency"]["segment_length"], 60.0);
}

#[test]
fn missing_input_is_usage_error_without_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = x2car(&[
        "gnss",
        "--poses",
        s(&dir.path().join("nope.csv")),
        "--output",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!report.exists());
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_override_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &gnss_spec(1, 0.0));
    let report = dir.path().join("r.json");
    let poses = sim.join("gnss_poses.csv");
    for set in ["gnss.heading.gates.vmin=1", "consistency.segment_length=-1"] {
        let o = x2car(&[
            "gnss",
            "--poses",
            s(&poses),
            "--output",
            s(&report),
            "--set",
            set,
        ]);
        assert_eq!(o.status.code(), Some(2), "{set}");
        assert!(!report.exists());
    }
}

#[test]
fn data_error_writes_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let poses = dir.path().join("p.csv");
    std::fs::write(
        &poses,
        "t,x,y,z,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.1,0,0,0,1,0,0,0\n",
    )
    .unwrap();
    let report = dir.path().join("r.json");
    let o = x2car(&["gnss", "--poses", s(&poses), "--output", s(&report)]);
    assert_eq!(o.status.code(), Some(1));
    let r = read_json(&report);
    assert_eq!(r["status"], "error");
    assert!(r["error"]["code"].is_string());
}

fn radar_spec() -> ScenarioSpec {
    let mut spec = ScenarioSpec::new(RoutePlan::builder().straight(30.0, 10.0).build(), 5);
    spec.radar = Some(RadarSimSpec {
        mount_yaw: 10f64.to_radians(),
        sigma_doppler: 0.1,
        landmarks: LandmarkSpec {
            count: 200,
            ..Default::default()
        },
        ..Default::default()
    });
    spec
}

#[test]
fn radar_velocity_trace_has_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &radar_spec());
    let report = dir.path().join("rv.json");
    let o = x2car(&[
        "radar-velocity",
        "--radar",
        s(&sim.join("radar.csv")),
        "--output",
        s(&report),
        "--trace",
        "--set",
        "radar_velocity.iterations=321",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(dir.path().join("rv_trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "iteration,psi");
    assert_eq!(lines.len(), 1 + 321);
    assert_eq!(read_json(&report)["result"]["iterations"], 321);
    assert!(lines[321].starts_with("321,"));
}

#[test]
fn trace_needs_output() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &radar_spec());
    let o = x2car(&[
        "radar-velocity",
        "--radar",
        s(&sim.join("radar.csv")),
        "--trace",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn radar_position_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &radar_spec());
    let o = x2car(&["radar-position", "--radar", s(&sim.join("radar.csv"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["result"]["yaw"]["deg"].as_f64().unwrap() - 10.0).abs() < 0.01);
}

fn lidar_spec() -> ScenarioSpec {
    let plan = RoutePlan::builder()
        .straight(30.0, 10.0)
        .arc(10.0, 10.0, 0.1)
        .straight(30.0, 10.0)
        .build();
    let mut spec = ScenarioSpec::new(plan, 2);
    spec.lidar = Some(LidarSimSpec {
        mount: EulerYPR::from_degrees(3.0, 2.0, 1.0),
        points_per_frame: 150,
        sigma_point: 0.01,
        clutter_fraction: 0.2,
        ..Default::default()
    });
    spec
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &lidar_spec());
    let poses = sim.join("lidar_poses.csv");
    let clouds = sim.join("clouds");
    let with = |cmd: &str, name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            cmd,
            "--seed",
            "9",
            "--output",
            s(&out),
            "--poses",
            s(&poses),
            "--clouds",
            s(&clouds),
        ];
        args.extend_from_slice(extra);
        let o = x2car(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(&out).unwrap()
    };
    assert_eq!(with("lidar", "a.json", &[]), with("lidar", "b.json", &[]));
    let seg = ["--method", "lidar", "--segment-length", "20"];
    assert_eq!(
        with("consistency", "c.json", &seg),
        with("consistency", "d.json", &seg)
    );

    let r = read_json(&dir.path().join("a.json"));
    let truth = read_json(&sim.join("truth.json"));
    for k in ["roll", "pitch", "yaw"] {
        let got = r["result"][k]["rad"].as_f64().unwrap();
        assert!(
            (got - truth["lidar"][k].as_f64().unwrap()).abs() < 0.1f64.to_radians(),
            "{k}"
        );
    }
    assert!((r["result"]["z"].as_f64().unwrap() - 1.9).abs() < 0.01);
}

#[test]
fn simulate_is_reproducible_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = radar_spec();
    let scenario = dir.path().join("s.toml");
    std::fs::write(&scenario, toml::to_string(&spec).unwrap()).unwrap();
    let run = |out: &str, seed: Option<&str>| {
        let out = dir.path().join(out);
        let mut args = vec!["simulate", "--scenario", s(&scenario), "--output", s(&out)];
        if let Some(seed) = seed {
            args.extend(["--seed", seed]);
        }
        assert!(x2car(&args).status.success());
        std::fs::read(out.join("radar.csv")).unwrap()
    };
    assert_eq!(run("a", None), run("b", None));
    assert_ne!(run("a", None), run("c", Some("6")));
    assert_eq!(read_json(&dir.path().join("c/truth.json"))["seed"], 6);
}

#[test]
fn noiseless_consistency_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ScenarioSpec::new(RoutePlan::builder().straight(180.0, 10.0).build(), 1);
    spec.gnss = Some(GnssSimSpec {
        mount_yaw: 0.02,
        ..Default::default()
    });
    let sim = simulate(dir.path(), &spec);
    let o = x2car(&[
        "consistency",
        "--method",
        "gnss",
        "--poses",
        s(&sim.join("gnss_poses.csv")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let res = &r["result"];
    assert_eq!(res["segment_count"], 3);
    assert_eq!(res["straight_count"], 3);
    assert_eq!(res["all"]["std"]["yaw"]["rad"], 0.0);
    assert_eq!(res["straight"]["std"]["yaw"]["rad"], 0.0);
    let segs = res["segments"].as_array().unwrap();
    assert_eq!(segs.len(), 3);
    for (i, seg) in segs.iter().enumerate() {
        assert_eq!(seg["index"], i);
        assert_eq!(seg["estimate"]["yaw"], segs[0]["estimate"]["yaw"]);
    }
}

#[test]
fn consistency_needs_two_segments() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &gnss_spec(1, 0.0));
    let report = dir.path().join("r.json");
    let o = x2car(&[
        "consistency",
        "--method",
        "gnss",
        "--poses",
        s(&sim.join("gnss_poses.csv")),
        "--segment-length",
        "45",
        "--output",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(read_json(&report)["error"]["code"], "too_few_samples");
}

#[test]
fn config_file_values_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), &gnss_spec(1, 0.0));
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 4\n[gnss.heading.gates]\nc_max = 0.02\n").unwrap();
    let o = x2car(&[
        "gnss",
        "--config",
        s(&cfg),
        "--set",
        "gnss.heading.degree=5",
        "--poses",
        s(&sim.join("gnss_poses.csv")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["params"]["seed"], 4);
    assert_eq!(r["params"]["gnss"]["heading"]["gates"]["c_max"], 0.02);
    assert_eq!(r["params"]["gnss"]["heading"]["degree"], 5);
}

#[test]
fn camera_from_simulated_vp_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ScenarioSpec::new(RoutePlan::builder().straight(40.0, 10.0).build(), 3);
    spec.camera = Some(x2car::sim::CameraSimSpec {
        mount: EulerYPR::from_degrees(2.0, -1.0, 0.5),
        sigma_vp_px: 1.0,
        ..Default::default()
    });
    let sim = simulate(dir.path(), &spec);
    let report = dir.path().join("cam.json");
    let o = x2car(&[
        "camera",
        "--intrinsics",
        s(&sim.join("intrinsics.toml")),
        "--vp",
        s(&sim.join("vp.csv")),
        "--output",
        s(&report),
        "--trace",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&report);
    let truth = read_json(&sim.join("truth.json"));
    for k in ["yaw", "pitch", "roll"] {
        let got = r["result"][k]["rad"].as_f64().unwrap();
        let want = truth["camera"][k].as_f64().unwrap();
        assert!((got - want).abs() < 0.2f64.to_radians(), "{k}");
    }
    let trace = std::fs::read_to_string(dir.path().join("cam_trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("t,roll,pitch,yaw,window_std"));
    assert_eq!(
        trace.lines().count() as u64,
        1 + r["result"]["emissions"].as_u64().unwrap()
    );
}
