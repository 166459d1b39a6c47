//! Loaded inputs for one calibration method, with time slicing and a uniform
//! view of the estimate for consistency runs.

use std::collections::BTreeMap;

use clap::ValueEnum;
use serde::Serialize;

use x2car::camera::{calibrate_camera, Intrinsics, VPObservation};
use x2car::gnss::gnss_yaw_offset;
use x2car::lidar::{calibrate_lidar, PointCloudFrame};
use x2car::radar::{calibrate_radar_position, calibrate_radar_velocity, RadarPoint};
use x2car::trajectory::{Pose6D, PoseSample};
use x2car::{CalibError, Result};

use crate::params::Params;
use crate::report::Angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Camera,
    Lidar,
    Gnss,
    RadarVelocity,
    RadarPosition,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Camera => "camera",
            Method::Lidar => "lidar",
            Method::Gnss => "gnss",
            Method::RadarVelocity => "radar-velocity",
            Method::RadarPosition => "radar-position",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Dataset {
    /// `track` is optional and only used to label straight segments.
    Camera {
        k: Intrinsics<f64>,
        obs: Vec<VPObservation<f64>>,
        track: Option<Vec<Pose6D<f64>>>,
    },
    Lidar {
        poses: Vec<Pose6D<f64>>,
        frames: Vec<PointCloudFrame<f64>>,
    },
    Gnss {
        poses: Vec<Pose6D<f64>>,
    },
    Radar {
        method: Method,
        rows: Vec<RadarPoint<f64>>,
    },
}

/// Angles and lengths of one run, plus the method-specific detail.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub angles: BTreeMap<&'static str, f64>,
    pub lengths: BTreeMap<&'static str, f64>,
    pub detail: serde_json::Value,
    pub trace: Option<Trace>,
}

/// Rows for the `<stem>_trace.csv` file.
#[derive(Debug, Clone)]
pub struct Trace {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

fn in_window(t: f64, t0: f64, t1: f64) -> bool {
    t >= t0 && t < t1
}

fn window<V: Clone>(v: &[V], t0: f64, t1: f64, time: impl Fn(&V) -> f64) -> Vec<V> {
    v.iter()
        .filter(|x| in_window(time(x), t0, t1))
        .cloned()
        .collect()
}

fn detail<S: Serialize>(s: S) -> serde_json::Value {
    serde_json::to_value(s).expect("estimate detail serializes")
}

impl Dataset {
    pub fn method(&self) -> Method {
        match self {
            Dataset::Camera { .. } => Method::Camera,
            Dataset::Lidar { .. } => Method::Lidar,
            Dataset::Gnss { .. } => Method::Gnss,
            Dataset::Radar { method, .. } => *method,
        }
    }

    /// Timestamps of the primary stream, in file order.
    pub fn times(&self) -> Vec<f64> {
        match self {
            Dataset::Camera { obs, .. } => obs.iter().map(|o| o.t).collect(),
            Dataset::Lidar { poses, .. } | Dataset::Gnss { poses } => {
                poses.iter().map(|p| p.t).collect()
            }
            Dataset::Radar { rows, .. } => rows.iter().map(|r| r.t).collect(),
        }
    }

    /// Planar track for straight-span extraction, one sample per timestamp.
    pub fn track(&self) -> Option<Vec<PoseSample<f64>>> {
        let mut s: Vec<PoseSample<f64>> = match self {
            Dataset::Camera { track, .. } => {
                track.as_ref()?.iter().map(Pose6D::to_sample).collect()
            }
            Dataset::Lidar { poses, .. } | Dataset::Gnss { poses } => {
                poses.iter().map(Pose6D::to_sample).collect()
            }
            Dataset::Radar { rows, .. } => rows
                .iter()
                .map(|p| PoseSample {
                    t: p.t,
                    x: p.ego_x,
                    y: p.ego_y,
                    z: 0.0,
                    yaw_sensor: 0.0,
                })
                .collect(),
        };
        s.sort_by(|a, b| a.t.total_cmp(&b.t));
        s.dedup_by(|a, b| a.t == b.t);
        Some(s)
    }

    /// Everything with `t0 <= t < t1`.
    pub fn slice(&self, t0: f64, t1: f64) -> Dataset {
        match self {
            Dataset::Camera { k, obs, track } => Dataset::Camera {
                k: *k,
                obs: window(obs, t0, t1, |o| o.t),
                track: track.as_ref().map(|p| window(p, t0, t1, |p| p.t)),
            },
            Dataset::Lidar { poses, frames } => Dataset::Lidar {
                poses: window(poses, t0, t1, |p| p.t),
                frames: window(frames, t0, t1, |f| f.t),
            },
            Dataset::Gnss { poses } => Dataset::Gnss {
                poses: window(poses, t0, t1, |p| p.t),
            },
            Dataset::Radar { method, rows } => Dataset::Radar {
                method: *method,
                rows: window(rows, t0, t1, |r| r.t),
            },
        }
    }

    pub fn run(&self, params: &Params, seed: u64) -> Result<Estimate> {
        match self {
            Dataset::Camera { k, obs, .. } => {
                let c = calibrate_camera(obs, k, &params.camera)?;
                let a = &c.aggregate;
                let trace = Trace {
                    header: vec!["t", "roll", "pitch", "yaw", "window_std"],
                    rows: c
                        .emissions
                        .iter()
                        .map(|e| vec![e.t, e.roll, e.pitch, e.yaw, e.window_std])
                        .collect(),
                };
                Ok(Estimate {
                    angles: BTreeMap::from([("roll", a.roll), ("pitch", a.pitch), ("yaw", a.yaw)]),
                    lengths: BTreeMap::new(),
                    detail: detail(CameraDetail {
                        roll: a.roll.into(),
                        pitch: a.pitch.into(),
                        yaw: a.yaw.into(),
                        emission_spread: a.window_std.into(),
                        emissions: c.emissions.len(),
                        frames_total: c.frames_total,
                        frames_rejected: c.frames_rejected,
                    }),
                    trace: Some(trace),
                })
            }
            Dataset::Lidar { poses, frames } => {
                let e = calibrate_lidar(frames, poses, &params.lidar, seed)?;
                Ok(Estimate {
                    angles: BTreeMap::from([("roll", e.roll), ("pitch", e.pitch), ("yaw", e.yaw)]),
                    lengths: BTreeMap::from([("z", e.z)]),
                    detail: detail(LidarDetail {
                        roll: e.roll.into(),
                        pitch: e.pitch.into(),
                        yaw: e.yaw.into(),
                        z: e.z,
                        roll_std: e.roll_std.into(),
                        pitch_std: e.pitch_std.into(),
                        yaw_std: e.yaw_std.into(),
                        z_std: e.z_std,
                        frames_used: e.frames_used,
                        frames_turn_rejected: e.turn_rejected.len(),
                        ground_failures: e.ground_failures,
                        yaw_used_count: e.yaw_used_count,
                    }),
                    trace: None,
                })
            }
            Dataset::Gnss { poses } => {
                let samples: Vec<PoseSample<f64>> = poses.iter().map(Pose6D::to_sample).collect();
                let e = gnss_yaw_offset(&samples, &params.gnss)?;
                Ok(Estimate {
                    angles: BTreeMap::from([("yaw", e.yaw_offset)]),
                    lengths: BTreeMap::new(),
                    detail: detail(GnssDetail {
                        yaw: e.yaw_offset.into(),
                        dispersion: e.dispersion.into(),
                        used_count: e.used_count,
                    }),
                    trace: None,
                })
            }
            Dataset::Radar {
                method: Method::RadarVelocity,
                rows,
            } => {
                let e = calibrate_radar_velocity(rows, &params.radar_velocity)?;
                let trace = Trace {
                    header: vec!["iteration", "psi"],
                    rows: e
                        .trace
                        .iter()
                        .enumerate()
                        .map(|(i, p)| vec![(i + 1) as f64, *p])
                        .collect(),
                };
                Ok(Estimate {
                    angles: BTreeMap::from([("yaw", e.yaw)]),
                    lengths: BTreeMap::new(),
                    detail: detail(VelocityDetail {
                        yaw: e.yaw.into(),
                        coarse_yaw: e.coarse_yaw.into(),
                        iterations: e.iterations,
                        frames_skipped: e.frames_skipped,
                    }),
                    trace: Some(trace),
                })
            }
            Dataset::Radar { rows, .. } => {
                let e = calibrate_radar_position(rows, &params.radar_position)?;
                Ok(Estimate {
                    angles: BTreeMap::from([("yaw", e.yaw)]),
                    lengths: BTreeMap::new(),
                    detail: detail(PositionDetail {
                        yaw: e.yaw.into(),
                        objects_used: e.objects_used,
                        pairs_used: e.pairs_used,
                        confidence_sum: e.confidence_sum,
                        straight_segments: e.segments,
                    }),
                    trace: None,
                })
            }
        }
    }
}

#[derive(Serialize)]
struct CameraDetail {
    roll: Angle,
    pitch: Angle,
    yaw: Angle,
    /// Largest circular std of the emitted window means over the three angles.
    emission_spread: Angle,
    emissions: usize,
    frames_total: usize,
    frames_rejected: usize,
}

#[derive(Serialize)]
struct LidarDetail {
    roll: Angle,
    pitch: Angle,
    yaw: Angle,
    z: f64,
    roll_std: Angle,
    pitch_std: Angle,
    yaw_std: Angle,
    z_std: f64,
    frames_used: usize,
    frames_turn_rejected: usize,
    ground_failures: usize,
    yaw_used_count: usize,
}

#[derive(Serialize)]
struct GnssDetail {
    yaw: Angle,
    dispersion: Angle,
    used_count: usize,
}

#[derive(Serialize)]
struct VelocityDetail {
    yaw: Angle,
    coarse_yaw: Angle,
    iterations: usize,
    frames_skipped: usize,
}

#[derive(Serialize)]
struct PositionDetail {
    yaw: Angle,
    objects_used: usize,
    pairs_used: usize,
    confidence_sum: f64,
    straight_segments: usize,
}

/// Error for an empty slice, so per-segment failures read clearly.
pub fn require_nonempty(d: &Dataset) -> Result<()> {
    if d.times().is_empty() {
        Err(CalibError::EmptyInput("segment"))
    } else {
        Ok(())
    }
}
