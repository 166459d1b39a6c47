use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RadarPoint;
use crate::circular::weighted_angle_mean;
use crate::error::{CalibError, Result};
use crate::geom::{safe_acos, wrap_angle};
use crate::real::Real;
use crate::trajectory::{extract_straight_segments, PoseSample, SegmentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct PositionConfig<T> {
    pub min_track_frames: usize,
    /// Angle tolerance of the static-object triangle test, radians.
    pub static_tol: T,
    /// Pairs with a shorter ego baseline are skipped, meters.
    pub d_min: T,
    pub segments: SegmentConfig<T>,
}

impl<T: Real> Default for PositionConfig<T> {
    fn default() -> Self {
        Self {
            min_track_frames: 5,
            static_tol: T::lit(0.02),
            d_min: T::one(),
            segments: SegmentConfig::default(),
        }
    }
}

/// Detections of one track over consecutive frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarObject<T> {
    pub track_id: u64,
    pub points: Vec<RadarPoint<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarPositionEstimate<T> {
    pub yaw: T,
    pub objects_used: usize,
    pub pairs_used: usize,
    pub confidence_sum: T,
    pub segments: usize,
}

/// Maximal runs of consecutive frames per track, kept when at least
/// `min_track_frames` long. Frames are the distinct timestamps of `points`.
/// Objects come out ordered by track id, then time.
pub fn group_objects<T: Real>(
    points: &[RadarPoint<T>],
    min_track_frames: usize,
) -> Vec<RadarObject<T>> {
    let mut times: Vec<T> = points.iter().map(|p| p.t).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    times.dedup();
    let frame_of = |t: T| times.partition_point(|&s| s < t);

    let mut by_track: BTreeMap<u64, Vec<(usize, RadarPoint<T>)>> = BTreeMap::new();
    for p in points {
        by_track
            .entry(p.track_id)
            .or_default()
            .push((frame_of(p.t), *p));
    }
    let mut out = Vec::new();
    for (id, mut members) in by_track {
        members.sort_by_key(|(f, _)| *f);
        members.dedup_by_key(|(f, _)| *f);
        let mut run: Vec<RadarPoint<T>> = Vec::new();
        let mut last: Option<usize> = None;
        for (f, p) in members {
            if last.is_some_and(|l| f != l + 1) {
                if run.len() >= min_track_frames {
                    out.push(RadarObject {
                        track_id: id,
                        points: std::mem::take(&mut run),
                    });
                }
                run.clear();
            }
            run.push(p);
            last = Some(f);
        }
        if run.len() >= min_track_frames {
            out.push(RadarObject {
                track_id: id,
                points: run,
            });
        }
    }
    out
}

fn baseline<T: Real>(a: &RadarPoint<T>, b: &RadarPoint<T>) -> T {
    (b.ego_x - a.ego_x).hypot(b.ego_y - a.ego_y)
}

/// True when, for every informative pair with the first point, the angle the
/// object subtends between the two ego positions matches the change in
/// azimuth within `tol`. Pairs with baseline `<= d_min` are skipped.
pub fn is_static_object<T: Real>(obj: &RadarObject<T>, tol: T, d_min: T) -> Result<bool> {
    let Some(p0) = obj.points.first() else {
        return Err(CalibError::Indeterminate);
    };
    let mut informative = 0;
    for pi in &obj.points[1..] {
        let d = baseline(p0, pi);
        if d <= d_min {
            continue;
        }
        informative += 1;
        let (l0, li) = (p0.range, pi.range);
        let subtended = safe_acos((li * li + l0 * l0 - d * d) / (T::lit(2.0) * li * l0));
        if !((subtended - wrap_angle(pi.azimuth - p0.azimuth).abs()).abs() < tol) {
            return Ok(false);
        }
    }
    if informative == 0 {
        return Err(CalibError::Indeterminate);
    }
    Ok(true)
}

/// Yaw from one static object seen from two ego positions on a straight
/// baseline. The triangle angle at the first position is measured from the
/// forward baseline, the one at the second from the backward baseline, hence
/// the supplement. The side of the object is the sign of the azimuth change.
pub fn yaw_from_pair<T: Real>(p0: &RadarPoint<T>, pi: &RadarPoint<T>) -> Result<T> {
    let d = baseline(p0, pi);
    let (l0, li) = (p0.range, pi.range);
    if !(d > T::zero()) {
        return Err(CalibError::Collinear);
    }
    let two = T::lit(2.0);
    let c0 = (l0 * l0 + d * d - li * li) / (two * d * l0);
    let ci = (li * li + d * d - l0 * l0) / (two * d * li);
    let floor = T::floor_tol(1e-6);
    if (T::one() - c0 * c0).max(T::zero()).sqrt() < floor
        || (T::one() - ci * ci).max(T::zero()).sqrt() < floor
    {
        return Err(CalibError::Collinear);
    }
    let dtheta = wrap_angle(pi.azimuth - p0.azimuth);
    if dtheta == T::zero() {
        return Err(CalibError::Collinear);
    }
    let side = dtheta.signum();
    let psi2 = side * safe_acos(c0) - p0.azimuth;
    let psi1 = side * (T::PI() - safe_acos(ci)) - pi.azimuth;
    Ok(wrap_angle(psi2 + wrap_angle(psi1 - psi2) / two))
}

/// `1 - |v_r / cos(theta + psi) - v_g| / v_g`, clamped to `[0, 1]`; zero
/// when the cosine is below 1e-3 or the ego is not moving.
pub fn estimation_confidence<T: Real>(p: &RadarPoint<T>, psi: T) -> T {
    let c = (p.azimuth + psi).cos();
    if c.abs() <= T::lit(1e-3) || !(p.ego_speed > T::zero()) {
        return T::zero();
    }
    let v = T::one() - (p.doppler / c - p.ego_speed).abs() / p.ego_speed;
    v.max(T::zero()).min(T::one())
}

/// Confidence-weighted average of yaw estimates, normalized by the weight
/// sum.
pub fn weighted_yaw<T: Real>(estimates: &[(T, T)]) -> Result<T> {
    let (angles, weights): (Vec<T>, Vec<T>) = estimates.iter().copied().unzip();
    weighted_angle_mean(&angles, &weights)
}

/// `(yaw, confidence)` for the first point paired with every later point
/// whose baseline exceeds `d_min`. Degenerate pairs are dropped.
pub fn pair_yaws<T: Real>(obj: &RadarObject<T>, d_min: T) -> Vec<(T, T)> {
    let Some(p0) = obj.points.first() else {
        return Vec::new();
    };
    obj.points[1..]
        .iter()
        .filter(|pi| baseline(p0, pi) > d_min)
        .filter_map(|pi| {
            yaw_from_pair(p0, pi)
                .ok()
                .map(|psi| (psi, estimation_confidence(pi, psi)))
        })
        .collect()
}

/// Straight segments of the ego track, static objects inside them, and the
/// confidence-weighted mean of all pair estimates.
pub fn calibrate_radar_position<T: Real>(
    points: &[RadarPoint<T>],
    cfg: &PositionConfig<T>,
) -> Result<RadarPositionEstimate<T>> {
    let mut ego: Vec<PoseSample<T>> = points
        .iter()
        .map(|p| PoseSample {
            t: p.t,
            x: p.ego_x,
            y: p.ego_y,
            z: T::zero(),
            yaw_sensor: T::zero(),
        })
        .collect();
    ego.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(std::cmp::Ordering::Equal));
    ego.dedup_by(|a, b| a.t == b.t);
    let segments = extract_straight_segments(&ego, &cfg.segments);
    if segments.is_empty() {
        return Err(CalibError::NoStraightSegments);
    }

    let mut estimates = Vec::new();
    let mut objects_used = 0;
    for seg in &segments {
        let inside: Vec<RadarPoint<T>> = points
            .iter()
            .copied()
            .filter(|p| seg.contains(p.t))
            .collect();
        for obj in group_objects(&inside, cfg.min_track_frames) {
            if !matches!(is_static_object(&obj, cfg.static_tol, cfg.d_min), Ok(true)) {
                continue;
            }
            let pairs = pair_yaws(&obj, cfg.d_min);
            if !pairs.is_empty() {
                objects_used += 1;
                estimates.extend(pairs);
            }
        }
    }
    if objects_used == 0 {
        return Err(CalibError::NoStaticObjects);
    }
    let yaw = weighted_yaw(&estimates)?;
    Ok(RadarPositionEstimate {
        yaw,
        objects_used,
        pairs_used: estimates.len(),
        confidence_sum: estimates.iter().map(|e| e.1).sum(),
        segments: segments.len(),
    })
}
