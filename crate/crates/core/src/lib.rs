//! Rotation calibration from sensor frames to the vehicle body frame.
//!
//! Four estimators share one set of geometric and statistical primitives:
//!
//! * [`camera`]: vanishing point and horizon line to roll, pitch and yaw.
//! * [`lidar`]: ground-plane extraction for roll, pitch and height, plus
//!   trajectory heading for yaw.
//! * [`gnss`]: yaw of an INS against the heading of its own trajectory.
//! * [`radar`]: yaw of a 2-D Doppler radar from static-target velocities or
//!   from ranges and azimuths of tracked static objects.
//!
//! [`sim`] generates scenarios with known mounts for verifying all of them.
//!
//! The math is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root name the common `f64` instantiations.

// NaN-rejecting guards are written as `!(x > 0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod camera;
pub mod circular;
pub mod error;
pub mod geom;
pub mod gnss;
pub mod io;
pub mod lidar;
mod linalg;
pub mod radar;
pub mod real;
pub mod seed;
pub mod sim;
pub mod trajectory;

pub use error::{CalibError, Result};
pub use real::Real;

pub type Vec3d = geom::Vec3<f64>;
pub type UnitVec3d = geom::UnitVec3<f64>;
pub type RotMat3d = geom::RotMat3<f64>;
pub type EulerYPRd = geom::EulerYPR<f64>;
pub type EulerYPRf = geom::EulerYPR<f32>;
pub type PoseSampled = trajectory::PoseSample<f64>;
pub type Pose6Dd = trajectory::Pose6D<f64>;
pub type TrajectorySplined = trajectory::TrajectorySpline<f64>;
pub type Intrinsicsd = camera::Intrinsics<f64>;
pub type VPObservationd = camera::VPObservation<f64>;
pub type LineSeg2Dd = camera::LineSeg2D<f64>;
pub type CameraEstimated = camera::CameraEstimate<f64>;
pub type PointCloudFramed = lidar::PointCloudFrame<f64>;
pub type PlaneModeld = lidar::PlaneModel<f64>;
pub type LidarEstimated = lidar::LidarEstimate<f64>;
pub type GnssEstimated = gnss::GnssEstimate<f64>;
pub type RadarPointd = radar::RadarPoint<f64>;
pub type RadarObjectd = radar::RadarObject<f64>;
