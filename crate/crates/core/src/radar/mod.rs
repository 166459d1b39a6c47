//! Yaw of a planar Doppler radar.
//!
//! Two estimators:
//!
//! * velocity: static targets satisfy `v_r = v_g cos(theta + psi)`; a coarse
//!   grid finds the majority yaw, then per-frame cosine fits refine it.
//! * position: within straight driving, each static track forms triangles
//!   with two ego positions whose angles give the yaw directly; estimates are
//!   combined with Doppler-consistency weights.
//!
//! Azimuth is counter-clockwise from the sensor forward axis. Doppler is
//! positive when closing.

mod position;
mod velocity;

pub use position::{
    calibrate_radar_position, estimation_confidence, group_objects, is_static_object, pair_yaws,
    weighted_yaw, yaw_from_pair, PositionConfig, RadarObject, RadarPositionEstimate,
};
pub use velocity::{
    calibrate_radar_velocity, coarse_yaw_search, cosine_residual, fit_cosine_yaw,
    refine_yaw_iterative, select_static_points, RadarVelocityEstimate, VelocityConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::real::Real;

/// One detection with the ego state joined in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint<T> {
    pub t: T,
    pub track_id: u64,
    pub range: T,
    pub azimuth: T,
    pub doppler: T,
    pub ego_speed: T,
    pub ego_x: T,
    pub ego_y: T,
}

impl<T: Real> RadarPoint<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.t,
            self.range,
            self.azimuth,
            self.doppler,
            self.ego_speed,
            self.ego_x,
            self.ego_y,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite
            || self.range <= T::zero()
            || self.azimuth.abs() > T::PI()
            || self.ego_speed < T::zero()
        {
            return Err(CalibError::InvalidInput(format!(
                "radar row at t={} is out of range",
                self.t
            )));
        }
        Ok(())
    }
}

/// Splits points into frames of equal timestamp, in time order.
pub fn split_frames<T: Real>(points: &[RadarPoint<T>]) -> Vec<Vec<RadarPoint<T>>> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(std::cmp::Ordering::Equal));
    let mut frames: Vec<Vec<RadarPoint<T>>> = Vec::new();
    for p in sorted {
        match frames.last_mut() {
            Some(f) if f[0].t == p.t => f.push(p),
            _ => frames.push(vec![p]),
        }
    }
    frames
}
