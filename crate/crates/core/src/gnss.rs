//! Heading offset of a GNSS/INS unit against the tangent of its own track.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::real::Real;
use crate::trajectory::{
    estimate_yaw_offset, fit_spline_with, GateConfig, HeadingConfig, PoseSample,
};

/// Heading settings with a lower speed floor than the LiDAR default.
pub fn gnss_heading_config<T: Real>() -> HeadingConfig<T> {
    HeadingConfig {
        gates: GateConfig {
            v_min_sq: T::lit(4.0),
            ..GateConfig::default()
        },
        ..HeadingConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct GnssConfig<T> {
    pub heading: HeadingConfig<T>,
}

impl<T: Real> Default for GnssConfig<T> {
    fn default() -> Self {
        Self {
            heading: gnss_heading_config(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnssEstimate<T> {
    pub yaw_offset: T,
    pub used_count: usize,
    pub dispersion: T,
    pub valid: Vec<T>,
}

/// Circular mean of `wrap(imu_yaw - heading)` over the gated timestamps.
///
/// When nothing passes the gates and most samples are below the speed
/// floor, the error is [`CalibError::Standstill`] with the median speed.
pub fn gnss_yaw_offset<T: Real>(
    poses: &[PoseSample<T>],
    cfg: &GnssConfig<T>,
) -> Result<GnssEstimate<T>> {
    match estimate_yaw_offset(poses, &cfg.heading) {
        Ok(y) => Ok(GnssEstimate {
            yaw_offset: y.offset,
            used_count: y.used_count,
            dispersion: y.dispersion,
            valid: y.valid.0,
        }),
        Err(CalibError::NoValidData(msg)) => {
            let spline = fit_spline_with(poses, cfg.heading.degree, cfg.heading.fit)?;
            let mut speeds: Vec<T> = poses
                .iter()
                .filter_map(|p| spline.speed_sq_at(p.t).ok())
                .collect();
            speeds.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            match speeds.get(speeds.len() / 2) {
                Some(&m) if m < cfg.heading.gates.v_min_sq => {
                    Err(CalibError::Standstill(m.sqrt().to_f64_lossy()))
                }
                _ => Err(CalibError::NoValidData(msg)),
            }
        }
        Err(e) => Err(e),
    }
}
