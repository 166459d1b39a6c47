//! LiDAR roll, pitch and height from the ground plane; yaw from the sensor
//! trajectory.
//!
//! Per kept frame: range filter, multi-start RANSAC, random-search refine,
//! total least squares on the refined inliers, then the rotation that levels
//! the plane normal. Frames taken while the sensor yaws faster than the gate
//! are dropped. Yaw is the mean offset between sensor yaw and trajectory
//! heading, read from poses with the estimated tilt removed.

mod ground;

pub use ground::{
    filter_points, plane_tilt, plane_to_rotation_height, ransac_plane_multi,
    refine_plane_random_search, refine_plane_traced, svd_plane_fit, PlaneModel, PointCloudFrame,
    RefineConfig,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{circular_mean, circular_std, unwrap_angles};
use crate::error::{CalibError, Result};
use crate::geom::EulerYPR;
use crate::real::Real;
use crate::seed::derive_seed;
use crate::trajectory::{estimate_yaw_offset, HeadingConfig, Pose6D, PoseSample, ValidSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct LidarConfig<T> {
    pub r_min: T,
    pub r_max: T,
    pub ransac_runs: usize,
    pub ransac_iterations: usize,
    pub inlier_tol: T,
    pub refine: RefineConfig<T>,
    /// Keep every `frame_stride`-th frame.
    pub frame_stride: usize,
    /// Frames with `|yaw rate|` at or above this are dropped, rad/s.
    pub max_yaw_rate: T,
    /// Half width of the window over which the yaw rate is fitted, seconds.
    pub yaw_rate_window: T,
    pub heading: HeadingConfig<T>,
}

impl<T: Real> Default for LidarConfig<T> {
    fn default() -> Self {
        Self {
            r_min: T::lit(2.0),
            r_max: T::lit(50.0),
            ransac_runs: 5,
            ransac_iterations: 200,
            inlier_tol: T::lit(0.05),
            refine: RefineConfig::default(),
            frame_stride: 10,
            max_yaw_rate: T::lit(0.05),
            yaw_rate_window: T::lit(1.0),
            heading: HeadingConfig::default(),
        }
    }
}

/// Ground result of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct FrameGround<T> {
    pub t: T,
    pub tilt: EulerYPR<T>,
    pub z: T,
    pub plane: PlaneModel<T>,
}

/// Full ground pipeline on one frame.
pub fn ground_from_frame<T: Real>(
    frame: &PointCloudFrame<T>,
    cfg: &LidarConfig<T>,
    rng_seed: u64,
) -> Result<FrameGround<T>> {
    let kept = filter_points(frame, cfg.r_min, cfg.r_max);
    let coarse = ransac_plane_multi(
        &kept.points,
        cfg.ransac_runs,
        cfg.ransac_iterations,
        cfg.inlier_tol,
        rng_seed,
    )?;
    let refined = refine_plane_random_search(
        &kept.points,
        &coarse,
        &cfg.refine,
        cfg.inlier_tol,
        derive_seed(rng_seed, 1),
    );
    let inliers = refined.inliers(&kept.points, cfg.inlier_tol);
    let plane = svd_plane_fit(&inliers)?;
    let (tilt, z) = plane_tilt(&plane)?;
    Ok(FrameGround {
        t: frame.t,
        tilt,
        z,
        plane,
    })
}

/// Yaw rate at `t` as the least-squares slope of unwrapped pose yaw over
/// `[t - half_window, t + half_window]`. `None` with fewer than two poses.
pub fn yaw_rate_at<T: Real>(times: &[T], unwrapped_yaw: &[T], t: T, half_window: T) -> Option<T> {
    let lo = times.partition_point(|&s| s < t - half_window);
    let hi = times.partition_point(|&s| s <= t + half_window);
    if hi < lo + 2 {
        return None;
    }
    let n = T::from_count(hi - lo);
    let mt = times[lo..hi].iter().copied().sum::<T>() / n;
    let my = unwrapped_yaw[lo..hi].iter().copied().sum::<T>() / n;
    let (mut sty, mut stt) = (T::zero(), T::zero());
    for k in lo..hi {
        let dt = times[k] - mt;
        sty = sty + dt * (unwrapped_yaw[k] - my);
        stt = stt + dt * dt;
    }
    (stt > T::zero()).then(|| sty / stt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarEstimate<T> {
    pub roll: T,
    pub pitch: T,
    pub yaw: T,
    pub z: T,
    pub roll_std: T,
    pub pitch_std: T,
    pub yaw_std: T,
    pub z_std: T,
    pub frames_used: usize,
    pub yaw_used_count: usize,
    /// Timestamps of kept frames dropped by the yaw-rate gate.
    pub turn_rejected: Vec<T>,
    /// Kept frames where no ground plane was found.
    pub ground_failures: usize,
    pub yaw_valid: ValidSet<T>,
}

fn std_or_zero<T: Real>(v: &[T], f: impl Fn(&[T]) -> Result<T>) -> Result<T> {
    if v.len() > 1 {
        f(v)
    } else {
        Ok(T::zero())
    }
}

/// Roll, pitch and height from ground planes, then yaw from the pose stream.
pub fn calibrate_lidar<T: Real>(
    frames: &[PointCloudFrame<T>],
    poses: &[Pose6D<T>],
    cfg: &LidarConfig<T>,
    rng_seed: u64,
) -> Result<LidarEstimate<T>> {
    if poses.len() < 2 {
        return Err(CalibError::TooFewSamples {
            need: 2,
            got: poses.len(),
        });
    }
    let times: Vec<T> = poses.iter().map(|p| p.t).collect();
    let yaws = unwrap_angles(
        &poses
            .iter()
            .map(|p| p.rotation.forward_heading())
            .collect::<Vec<_>>(),
    );

    let stride = cfg.frame_stride.max(1);
    let kept: Vec<(usize, &PointCloudFrame<T>)> =
        frames.iter().enumerate().step_by(stride).collect();
    let mut turn_rejected = Vec::new();
    let mut gated = Vec::with_capacity(kept.len());
    for (i, f) in kept {
        match yaw_rate_at(&times, &yaws, f.t, cfg.yaw_rate_window) {
            Some(rate) if rate.abs() < cfg.max_yaw_rate => gated.push((i, f)),
            _ => turn_rejected.push(f.t),
        }
    }

    let results: Vec<Result<FrameGround<T>>> = gated
        .par_iter()
        .map(|&(i, f)| ground_from_frame(f, cfg, derive_seed(rng_seed, i as u64)))
        .collect();
    let ground_failures = results.iter().filter(|r| r.is_err()).count();
    let grounds: Vec<FrameGround<T>> = results.into_iter().filter_map(|r| r.ok()).collect();
    if grounds.is_empty() {
        return Err(CalibError::NoValidData(
            "no ground plane found in any frame",
        ));
    }

    let rolls: Vec<T> = grounds.iter().map(|g| g.tilt.roll).collect();
    let pitches: Vec<T> = grounds.iter().map(|g| g.tilt.pitch).collect();
    let zs: Vec<T> = grounds.iter().map(|g| g.z).collect();
    let roll = circular_mean(&rolls)?;
    let pitch = circular_mean(&pitches)?;
    let nz = T::from_count(zs.len());
    let z = zs.iter().copied().sum::<T>() / nz;
    let z_std = if zs.len() > 1 {
        (zs.iter().map(|v| (*v - z).powi(2)).sum::<T>() / (nz - T::one())).sqrt()
    } else {
        T::zero()
    };

    let tilt = EulerYPR::new(T::zero(), pitch, roll).tilt_matrix();
    let levelled: Vec<PoseSample<T>> = poses.iter().map(|p| p.to_levelled_sample(&tilt)).collect();
    let yaw = estimate_yaw_offset(&levelled, &cfg.heading)?;

    Ok(LidarEstimate {
        roll,
        pitch,
        yaw: yaw.offset,
        z,
        roll_std: std_or_zero(&rolls, circular_std)?,
        pitch_std: std_or_zero(&pitches, circular_std)?,
        yaw_std: yaw.dispersion,
        z_std,
        frames_used: grounds.len(),
        yaw_used_count: yaw.used_count,
        turn_rejected,
        ground_failures,
        yaw_valid: yaw.valid,
    })
}

/// Yaw offset of LiDAR poses against their trajectory heading.
pub fn lidar_yaw_offset<T: Real>(
    poses: &[PoseSample<T>],
    cfg: &HeadingConfig<T>,
) -> Result<crate::trajectory::YawOffset<T>> {
    estimate_yaw_offset(poses, cfg)
}
