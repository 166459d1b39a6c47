use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::route::{Route, TruthState};
use crate::camera::{Intrinsics, VPObservation};
use crate::geom::{wrap_angle, EulerYPR, RotMat3, Vec3};
use crate::lidar::PointCloudFrame;
use crate::radar::RadarPoint;
use crate::trajectory::Pose6D;

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map_or(0.0, |n| n.sample(rng))
    } else {
        0.0
    }
}

/// Body roll while turning, proportional to yaw rate. Positive yaw rate
/// (left turn) rolls the body outward, raising the left side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleSpec {
    pub turn_roll: bool,
    /// Roll per unit yaw rate, rad per rad/s.
    pub turn_roll_gain: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            turn_roll: false,
            turn_roll_gain: 0.5f64.to_radians() / 0.05,
        }
    }
}

impl VehicleSpec {
    pub fn roll_at(&self, s: &TruthState) -> f64 {
        if self.turn_roll {
            self.turn_roll_gain * s.yaw_rate
        } else {
            0.0
        }
    }

    /// Vehicle attitude relative to the heading-aligned road frame.
    pub fn attitude(&self, s: &TruthState) -> RotMat3<f64> {
        RotMat3::rot_x(self.roll_at(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnssSimSpec {
    pub mount_yaw: f64,
    pub rate_hz: f64,
    pub sigma_yaw: f64,
    pub sigma_pos: f64,
}

impl Default for GnssSimSpec {
    fn default() -> Self {
        Self {
            mount_yaw: 0.0,
            rate_hz: 10.0,
            sigma_yaw: 0.0,
            sigma_pos: 0.0,
        }
    }
}

/// INS poses: heading plus mount yaw, with optional noise.
pub fn gen_gnss(spec: &GnssSimSpec, route: &Route, seed: u64) -> Vec<Pose6D<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    route
        .sample_times(spec.rate_hz)
        .into_iter()
        .map(|t| {
            let s = route.state_at(t);
            let yaw = s.heading + spec.mount_yaw + gauss(&mut rng, spec.sigma_yaw);
            let position = Vec3::new(
                s.x + gauss(&mut rng, spec.sigma_pos),
                s.y + gauss(&mut rng, spec.sigma_pos),
                0.0,
            );
            Pose6D {
                t,
                position,
                rotation: RotMat3::rot_z(wrap_angle(yaw)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarSimSpec {
    pub mount: EulerYPR<f64>,
    /// Distance from the sensor to the ground along the sensor z-axis.
    pub height: f64,
    pub rate_hz: f64,
    pub points_per_frame: usize,
    pub clutter_fraction: f64,
    /// Ground points are sampled at planar ranges in `[r_min, r_max]`.
    pub r_min: f64,
    pub r_max: f64,
    pub sigma_point: f64,
    pub sigma_yaw: f64,
    pub sigma_pos: f64,
}

impl Default for LidarSimSpec {
    fn default() -> Self {
        Self {
            mount: EulerYPR::zero(),
            height: 1.9,
            rate_hz: 10.0,
            points_per_frame: 500,
            clutter_fraction: 0.0,
            r_min: 3.0,
            r_max: 40.0,
            sigma_point: 0.0,
            sigma_yaw: 0.0,
            sigma_pos: 0.0,
        }
    }
}

/// Ground normal of the sensor frame at a given vehicle state.
pub fn lidar_ground_normal(
    spec: &LidarSimSpec,
    vehicle: &VehicleSpec,
    s: &TruthState,
) -> Vec3<f64> {
    let r = vehicle.attitude(s) * spec.mount.to_matrix();
    r.transpose().apply(&Vec3::new(0.0, 0.0, 1.0))
}

/// Sensor poses and point clouds. Each frame holds ground points on the
/// tilted plane `n . p + height * n.z = 0` plus clutter 0.2 m to 3 m above it.
pub fn gen_lidar(
    spec: &LidarSimSpec,
    route: &Route,
    vehicle: &VehicleSpec,
    seed: u64,
) -> (Vec<Pose6D<f64>>, Vec<PointCloudFrame<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mount = spec.mount.to_matrix();
    let n_clutter = (spec.points_per_frame as f64 * spec.clutter_fraction).round() as usize;
    let mut poses = Vec::new();
    let mut frames = Vec::new();
    for t in route.sample_times(spec.rate_hz) {
        let s = route.state_at(t);
        let att = vehicle.attitude(&s);
        let yaw = s.heading + gauss(&mut rng, spec.sigma_yaw);
        let position = Vec3::new(
            s.x + gauss(&mut rng, spec.sigma_pos),
            s.y + gauss(&mut rng, spec.sigma_pos),
            spec.height,
        );
        poses.push(Pose6D {
            t,
            position,
            rotation: RotMat3::rot_z(wrap_angle(yaw)) * att * mount,
        });

        let n = lidar_ground_normal(spec, vehicle, &s);
        let d = spec.height * n.z;
        let (r2min, r2max) = (spec.r_min * spec.r_min, spec.r_max * spec.r_max);
        let mut points = Vec::with_capacity(spec.points_per_frame);
        for k in 0..spec.points_per_frame {
            let r = rng.random_range(r2min..=r2max).sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let (x, y) = (r * a.cos(), r * a.sin());
            let mut z = -(n.x * x + n.y * y + d) / n.z;
            if k < n_clutter {
                z += rng.random_range(0.2..3.0);
            }
            let sp = spec.sigma_point;
            points.push(Vec3::new(
                x + gauss(&mut rng, sp),
                y + gauss(&mut rng, sp),
                z + gauss(&mut rng, sp),
            ));
        }
        frames.push(PointCloudFrame { t, points });
    }
    (poses, frames)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occlusion {
    pub landmark: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandmarkSpec {
    /// Fixed positions; when empty, `count` are scattered along the route.
    pub positions: Vec<[f64; 2]>,
    pub count: usize,
    pub lateral_min: f64,
    pub lateral_max: f64,
}

impl Default for LandmarkSpec {
    fn default() -> Self {
        Self {
            positions: Vec::new(),
            count: 40,
            lateral_min: 3.0,
            lateral_max: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarSimSpec {
    pub mount_yaw: f64,
    pub rate_hz: f64,
    pub fov: f64,
    pub max_range: f64,
    pub landmarks: LandmarkSpec,
    pub sigma_range: f64,
    pub sigma_azimuth: f64,
    pub sigma_doppler: f64,
    pub movers: usize,
    /// Share of emitted rows that are uniform junk.
    pub outlier_fraction: f64,
    pub occlusions: Vec<Occlusion>,
}

impl Default for RadarSimSpec {
    fn default() -> Self {
        Self {
            mount_yaw: 0.0,
            rate_hz: 20.0,
            fov: 120f64.to_radians(),
            max_range: 30.0,
            landmarks: LandmarkSpec::default(),
            sigma_range: 0.0,
            sigma_azimuth: 0.0,
            sigma_doppler: 0.0,
            movers: 0,
            outlier_fraction: 0.0,
            occlusions: Vec::new(),
        }
    }
}

/// Landmarks from the spec: fixed, or scattered on both sides of the route.
pub fn place_landmarks(spec: &LandmarkSpec, route: &Route, seed: u64) -> Vec<[f64; 2]> {
    if !spec.positions.is_empty() {
        return spec.positions.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.count)
        .map(|_| {
            let s = route.state_at(rng.random_range(route.t_start()..=route.t_end()));
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let lat =
                side * rng.random_range(spec.lateral_min..=spec.lateral_max.max(spec.lateral_min));
            [s.x - lat * s.heading.sin(), s.y + lat * s.heading.cos()]
        })
        .collect()
}

struct Target {
    p0: [f64; 2],
    v: [f64; 2],
    track: Option<u64>,
}

/// Radar rows: azimuth relative to the sensor forward axis, Doppler as the
/// closing speed. Static targets obey `v_r = v_g cos(theta + psi)` before
/// noise. A target leaving view gets a new track id when it returns.
pub fn gen_radar(
    spec: &RadarSimSpec,
    route: &Route,
    landmarks: &[[f64; 2]],
    seed: u64,
) -> Vec<RadarPoint<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets: Vec<Target> = landmarks
        .iter()
        .map(|&p0| Target {
            p0,
            v: [0.0, 0.0],
            track: None,
        })
        .collect();
    for _ in 0..spec.movers {
        let s = route.state_at(rng.random_range(route.t_start()..=route.t_end()));
        let lat = rng.random_range(-8.0..8.0);
        let speed = rng.random_range(3.0..10.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let (c, sn) = (s.heading.cos(), s.heading.sin());
        // Positioned so it is near the ego at time s.t.
        let p_at = [s.x - lat * sn, s.y + lat * c];
        let v = [speed * c, speed * sn];
        let dt = s.t - route.t_start();
        targets.push(Target {
            p0: [p_at[0] - v[0] * dt, p_at[1] - v[1] * dt],
            v,
            track: None,
        });
    }
    let n_static = landmarks.len();
    let mut next_id: u64 = 1;
    let mut rows = Vec::new();
    let half_fov = spec.fov / 2.0;
    let keep = if spec.outlier_fraction > 0.0 {
        spec.outlier_fraction / (1.0 - spec.outlier_fraction).max(1e-9)
    } else {
        0.0
    };
    for t in route.sample_times(spec.rate_hz) {
        let s = route.state_at(t);
        let tau = t - route.t_start();
        let ego_v = [s.speed * s.heading.cos(), s.speed * s.heading.sin()];
        let mut frame = Vec::new();
        for (i, tg) in targets.iter_mut().enumerate() {
            let pos = [tg.p0[0] + tg.v[0] * tau, tg.p0[1] + tg.v[1] * tau];
            let rel = [pos[0] - s.x, pos[1] - s.y];
            let range = rel[0].hypot(rel[1]);
            let azimuth = wrap_angle(rel[1].atan2(rel[0]) - s.heading - spec.mount_yaw);
            let occluded = i < n_static
                && spec
                    .occlusions
                    .iter()
                    .any(|o| o.landmark == i && t >= o.start && t < o.end);
            let visible =
                azimuth.abs() <= half_fov && range <= spec.max_range && range > 0.0 && !occluded;
            if !visible {
                tg.track = None;
                continue;
            }
            let id = *tg.track.get_or_insert_with(|| {
                next_id += 1;
                next_id - 1
            });
            let closing = (rel[0] * (ego_v[0] - tg.v[0]) + rel[1] * (ego_v[1] - tg.v[1])) / range;
            frame.push(RadarPoint {
                t,
                track_id: id,
                range: range + gauss(&mut rng, spec.sigma_range),
                azimuth: wrap_angle(azimuth + gauss(&mut rng, spec.sigma_azimuth)),
                doppler: closing + gauss(&mut rng, spec.sigma_doppler),
                ego_speed: s.speed,
                ego_x: s.x,
                ego_y: s.y,
            });
        }
        let n_junk = (frame.len() as f64 * keep + rng.random::<f64>()).floor() as usize;
        for _ in 0..n_junk {
            frame.push(RadarPoint {
                t,
                track_id: next_id,
                range: rng.random_range(1.0..spec.max_range),
                azimuth: rng.random_range(-half_fov..half_fov),
                doppler: rng.random_range(-s.speed - 5.0..s.speed + 5.0),
                ego_speed: s.speed,
                ego_x: s.x,
                ego_y: s.y,
            });
            next_id += 1;
        }
        frame.sort_by_key(|p| p.track_id);
        rows.extend(frame);
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSimSpec {
    pub mount: EulerYPR<f64>,
    pub intrinsics: Intrinsics<f64>,
    pub rate_hz: f64,
    pub sigma_vp_px: f64,
    pub sigma_hl: f64,
    /// In turns the road direction is taken this many seconds ahead.
    pub lookahead: f64,
}

impl Default for CameraSimSpec {
    fn default() -> Self {
        Self {
            mount: EulerYPR::zero(),
            intrinsics: Intrinsics {
                fx: 1000.0,
                fy: 1000.0,
                cx: 640.0,
                cy: 360.0,
                skew: 0.0,
            },
            rate_hz: 10.0,
            sigma_vp_px: 0.0,
            sigma_hl: 0.0,
            lookahead: 1.0,
        }
    }
}

fn body_to_optical(b: &Vec3<f64>) -> Vec3<f64> {
    Vec3::new(-b.y, -b.z, b.x)
}

/// Exact vanishing point of a vehicle-frame direction and horizon angle for
/// a sensor-to-vehicle rotation `r`. `None` if the direction is behind.
pub fn project_vp_hl(
    k: &Intrinsics<f64>,
    r: &RotMat3<f64>,
    road_dir: &Vec3<f64>,
) -> Option<((f64, f64), f64)> {
    let rt = r.transpose();
    let vp = k.project(&body_to_optical(&rt.apply(road_dir)))?;
    let n = body_to_optical(&rt.apply(&Vec3::new(0.0, 0.0, 1.0)));
    // Horizon line l = K^-T n; only its (a, b) part sets the direction.
    let a = n.x / k.fx;
    let b = -k.skew * n.x / (k.fx * k.fy) + n.y / k.fy;
    let (mut du, mut dv) = (b, -a);
    if du < 0.0 || (du == 0.0 && dv > 0.0) {
        du = -du;
        dv = -dv;
    }
    Some((vp, (-dv).atan2(du)))
}

/// Per-frame VP and horizon angle of the road ahead.
pub fn gen_camera(
    spec: &CameraSimSpec,
    route: &Route,
    vehicle: &VehicleSpec,
    seed: u64,
) -> Vec<VPObservation<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mount = spec.mount.to_matrix();
    route
        .sample_times(spec.rate_hz)
        .into_iter()
        .filter_map(|t| {
            let s = route.state_at(t);
            let ahead = s.yaw_rate * spec.lookahead;
            let dir = Vec3::new(ahead.cos(), ahead.sin(), 0.0);
            let r = vehicle.attitude(&s) * mount;
            let ((u, v), theta) = project_vp_hl(&spec.intrinsics, &r, &dir)?;
            Some(VPObservation {
                t,
                vp: (
                    u + gauss(&mut rng, spec.sigma_vp_px),
                    v + gauss(&mut rng, spec.sigma_vp_px),
                ),
                hl_theta: theta + gauss(&mut rng, spec.sigma_hl),
            })
        })
        .collect()
}
