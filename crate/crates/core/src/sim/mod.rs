//! Synthetic scenarios with known mounts.
//!
//! A route plan of straights and arcs gives the analytic vehicle state; each
//! enabled sensor is sampled from it with Gaussian noise. Every generator is
//! seeded from the scenario seed, so the same spec always produces the same
//! bits. All quantities are `f64`.

mod route;
mod sensors;

pub use route::{gen_trajectory, Origin, Primitive, Route, RouteBuilder, RoutePlan, TruthState};
pub use sensors::{
    gen_camera, gen_gnss, gen_lidar, gen_radar, lidar_ground_normal, place_landmarks,
    project_vp_hl, CameraSimSpec, GnssSimSpec, LandmarkSpec, LidarSimSpec, Occlusion, RadarSimSpec,
    VehicleSpec,
};

use serde::{Deserialize, Serialize};

use crate::camera::VPObservation;
use crate::error::{CalibError, Result};
use crate::geom::EulerYPR;
use crate::lidar::PointCloudFrame;
use crate::radar::RadarPoint;
use crate::seed::derive_seed;
use crate::trajectory::Pose6D;

const STREAM_GNSS: u64 = 1;
const STREAM_LIDAR: u64 = 2;
const STREAM_RADAR: u64 = 3;
const STREAM_CAMERA: u64 = 4;
const STREAM_LANDMARKS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub seed: u64,
    pub route: RoutePlan,
    #[serde(default)]
    pub vehicle: VehicleSpec,
    pub gnss: Option<GnssSimSpec>,
    pub lidar: Option<LidarSimSpec>,
    pub radar: Option<RadarSimSpec>,
    pub camera: Option<CameraSimSpec>,
}

impl ScenarioSpec {
    pub fn new(route: RoutePlan, seed: u64) -> Self {
        Self {
            seed,
            route,
            vehicle: VehicleSpec::default(),
            gnss: None,
            lidar: None,
            radar: None,
            camera: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.route.validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CalibError::InvalidInput(format!("{name} must be positive")))
            }
        };
        let sigma = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CalibError::InvalidInput(format!(
                    "{name} must be a finite sigma >= 0"
                )))
            }
        };
        if let Some(g) = &self.gnss {
            positive("gnss.rate_hz", g.rate_hz)?;
            sigma("gnss.sigma_yaw", g.sigma_yaw)?;
            sigma("gnss.sigma_pos", g.sigma_pos)?;
        }
        if let Some(l) = &self.lidar {
            positive("lidar.rate_hz", l.rate_hz)?;
            positive("lidar.height", l.height)?;
            sigma("lidar.sigma_point", l.sigma_point)?;
            sigma("lidar.sigma_yaw", l.sigma_yaw)?;
            sigma("lidar.sigma_pos", l.sigma_pos)?;
            if !(0.0..1.0).contains(&l.clutter_fraction) || !(l.r_min >= 0.0 && l.r_min < l.r_max) {
                return Err(CalibError::InvalidInput(
                    "lidar clutter_fraction in [0, 1) and 0 <= r_min < r_max".into(),
                ));
            }
        }
        if let Some(r) = &self.radar {
            positive("radar.rate_hz", r.rate_hz)?;
            positive("radar.fov", r.fov)?;
            positive("radar.max_range", r.max_range)?;
            sigma("radar.sigma_range", r.sigma_range)?;
            sigma("radar.sigma_azimuth", r.sigma_azimuth)?;
            sigma("radar.sigma_doppler", r.sigma_doppler)?;
            if !(0.0..1.0).contains(&r.outlier_fraction) {
                return Err(CalibError::InvalidInput(
                    "radar.outlier_fraction must be in [0, 1)".into(),
                ));
            }
        }
        if let Some(c) = &self.camera {
            positive("camera.rate_hz", c.rate_hz)?;
            sigma("camera.sigma_vp_px", c.sigma_vp_px)?;
            sigma("camera.sigma_hl", c.sigma_hl)?;
            c.intrinsics.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarTruth {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YawTruth {
    pub yaw: f64,
}

/// Declared mounts, written as `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub t_start: f64,
    pub t_end: f64,
    pub gnss: Option<YawTruth>,
    pub lidar: Option<LidarTruth>,
    pub radar: Option<YawTruth>,
    pub camera: Option<EulerYPR<f64>>,
}

/// LiDAR poses and the matching point-cloud frames.
pub type LidarStream = (Vec<Pose6D<f64>>, Vec<PointCloudFrame<f64>>);

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub truth: Truth,
    pub gnss_poses: Option<Vec<Pose6D<f64>>>,
    pub lidar: Option<LidarStream>,
    pub radar: Option<Vec<RadarPoint<f64>>>,
    pub landmarks: Vec<[f64; 2]>,
    pub camera: Option<Vec<VPObservation<f64>>>,
}

/// Runs every enabled generator. Sensors draw from independent streams, so
/// enabling one does not change another's output.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let route = Route::new(spec.route.clone())?;
    let seed = |k| derive_seed(spec.seed, k);
    let landmarks = spec
        .radar
        .as_ref()
        .map(|r| place_landmarks(&r.landmarks, &route, seed(STREAM_LANDMARKS)))
        .unwrap_or_default();
    let truth = Truth {
        seed: spec.seed,
        t_start: route.t_start(),
        t_end: route.t_end(),
        gnss: spec.gnss.map(|g| YawTruth { yaw: g.mount_yaw }),
        lidar: spec.lidar.map(|l| LidarTruth {
            roll: l.mount.roll,
            pitch: l.mount.pitch,
            yaw: l.mount.yaw,
            height: l.height,
        }),
        radar: spec.radar.as_ref().map(|r| YawTruth { yaw: r.mount_yaw }),
        camera: spec.camera.map(|c| c.mount),
    };
    Ok(Scenario {
        truth,
        gnss_poses: spec.gnss.map(|g| gen_gnss(&g, &route, seed(STREAM_GNSS))),
        lidar: spec
            .lidar
            .map(|l| gen_lidar(&l, &route, &spec.vehicle, seed(STREAM_LIDAR))),
        radar: spec
            .radar
            .as_ref()
            .map(|r| gen_radar(r, &route, &landmarks, seed(STREAM_RADAR))),
        landmarks,
        camera: spec
            .camera
            .map(|c| gen_camera(&c, &route, &spec.vehicle, seed(STREAM_CAMERA))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{frame_mount, Intrinsics};
    use crate::geom::{rodrigues, Vec3};
    use approx::assert_abs_diff_eq;

    fn straight(seconds: f64) -> RoutePlan {
        RoutePlan::builder().straight(seconds, 10.0).build()
    }

    #[test]
    fn gnss_offset_by_construction() {
        let route = Route::new(straight(20.0)).unwrap();
        let spec = GnssSimSpec {
            mount_yaw: 2f64.to_radians(),
            ..Default::default()
        };
        for p in gen_gnss(&spec, &route, 1) {
            let h = route.state_at(p.t).heading;
            assert_abs_diff_eq!(
                p.rotation.forward_heading() - h,
                2f64.to_radians(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn lidar_identity_mount_flat_ground() {
        let route = Route::new(straight(2.0)).unwrap();
        let (_, frames) = gen_lidar(&LidarSimSpec::default(), &route, &VehicleSpec::default(), 3);
        assert!(frames.iter().flat_map(|f| &f.points).all(|p| p.z == -1.9));
    }

    #[test]
    fn lidar_roll_normal_matches_rodrigues() {
        let roll = 1f64.to_radians();
        let spec = LidarSimSpec {
            mount: EulerYPR::new(0.0, 0.0, roll),
            ..Default::default()
        };
        let s = TruthState {
            t: 0.0,
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            speed: 10.0,
            yaw_rate: 0.0,
        };
        let n = lidar_ground_normal(&spec, &VehicleSpec::default(), &s);
        // Rolling the sensor by +r rotates world up by -r about x in sensor
        // coordinates.
        let expected = rodrigues(Vec3::new(1.0, 0.0, 0.0), -roll)
            .unwrap()
            .apply(&Vec3::new(0.0, 0.0, 1.0));
        for (a, b) in n.to_array().iter().zip(expected.to_array()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn lidar_clutter_count() {
        let route = Route::new(straight(1.0)).unwrap();
        let spec = LidarSimSpec {
            clutter_fraction: 0.2,
            ..Default::default()
        };
        let (_, frames) = gen_lidar(&spec, &route, &VehicleSpec::default(), 5);
        for f in frames {
            let above = f.points.iter().filter(|p| p.z > -1.9 + 0.1).count();
            assert!((above as f64 / f.points.len() as f64 - 0.2).abs() < 0.02);
        }
    }

    #[test]
    fn camera_identity_and_yaw() {
        let route = Route::new(straight(1.0)).unwrap();
        let k = Intrinsics {
            fx: 1000.0,
            fy: 1000.0,
            cx: 640.0,
            cy: 360.0,
            skew: 0.0,
        };
        let obs = gen_camera(
            &CameraSimSpec::default(),
            &route,
            &VehicleSpec::default(),
            0,
        );
        assert!(obs
            .iter()
            .all(|o| o.vp == (640.0, 360.0) && o.hl_theta == 0.0));

        let spec = CameraSimSpec {
            mount: EulerYPR::new(0.1, 0.0, 0.0),
            ..Default::default()
        };
        let o = gen_camera(&spec, &route, &VehicleSpec::default(), 0)[0];
        assert_abs_diff_eq!(o.vp.0, 640.0 + 1000.0 * 0.1f64.tan(), epsilon = 1e-9);
        let m = frame_mount(&o, &k).unwrap();
        assert_abs_diff_eq!(m.yaw, 0.1, epsilon = 1e-12);

        let spec = CameraSimSpec {
            mount: EulerYPR::new(0.02, -0.03, 0.05),
            ..Default::default()
        };
        for o in gen_camera(&spec, &route, &VehicleSpec::default(), 0) {
            assert_abs_diff_eq!(o.hl_theta, 0.05, epsilon = 1e-12);
        }
    }

    #[test]
    fn radar_fov_excludes_wide_bearing() {
        let route = Route::new(straight(0.0001)).unwrap();
        let at = |deg: f64| [20.0 * deg.to_radians().cos(), 20.0 * deg.to_radians().sin()];
        let rows = gen_radar(&RadarSimSpec::default(), &route, &[at(70.0), at(30.0)], 0);
        assert!(rows
            .iter()
            .all(|r| (r.azimuth - 30f64.to_radians()).abs() < 1e-12));
        assert!(!rows.is_empty());
    }

    #[test]
    fn radar_reentry_gets_new_track() {
        let route = Route::new(straight(3.0)).unwrap();
        let spec = RadarSimSpec {
            occlusions: vec![Occlusion {
                landmark: 0,
                start: 1.0,
                end: 1.5,
            }],
            ..Default::default()
        };
        let rows = gen_radar(&spec, &route, &[[28.0, 3.0]], 0);
        let ids: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.track_id).collect();
        assert_eq!(ids.len(), 2);
        assert!(rows.iter().all(|r| !(1.0..1.5).contains(&r.t)));
    }

    #[test]
    fn generate_is_deterministic() {
        let mut spec = ScenarioSpec::new(straight(5.0), 11);
        spec.gnss = Some(GnssSimSpec {
            sigma_yaw: 0.01,
            ..Default::default()
        });
        spec.radar = Some(RadarSimSpec {
            sigma_doppler: 0.1,
            movers: 2,
            outlier_fraction: 0.1,
            ..Default::default()
        });
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }
}
