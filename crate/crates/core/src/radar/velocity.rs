use serde::{Deserialize, Serialize};

use super::{split_frames, RadarPoint};
use crate::circular::circular_mean;
use crate::error::{CalibError, Result};
use crate::geom::wrap_angle;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct VelocityConfig<T> {
    /// Half width of the coarse grid, radians.
    pub search_range: T,
    pub search_step: T,
    /// Doppler residual below which a point counts as static, m/s.
    pub residual_tol: T,
    pub iterations: usize,
    /// Fraction of the iterations discarded before averaging.
    pub burn_in: T,
    /// Relaxation gain toward each per-frame fit.
    pub refine_gain: T,
    /// Frames with a slower ego speed are skipped, m/s.
    pub min_ego_speed: T,
}

impl<T: Real> Default for VelocityConfig<T> {
    fn default() -> Self {
        Self {
            search_range: T::lit(45f64.to_radians()),
            search_step: T::lit(5f64.to_radians()),
            residual_tol: T::lit(0.5),
            iterations: 500,
            burn_in: T::lit(0.5),
            refine_gain: T::lit(0.02),
            min_ego_speed: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarVelocityEstimate<T> {
    pub yaw: T,
    pub coarse_yaw: T,
    pub iterations: usize,
    /// Iterations that made no update: slow ego or too few static points.
    pub frames_skipped: usize,
    /// Yaw after each iteration.
    pub trace: Vec<T>,
}

/// `v_r - v_g cos(theta + psi)`.
pub fn cosine_residual<T: Real>(p: &RadarPoint<T>, psi: T) -> T {
    p.doppler - p.ego_speed * (p.azimuth + psi).cos()
}

fn is_static<T: Real>(p: &RadarPoint<T>, psi: T, tol: T) -> bool {
    cosine_residual(p, psi).abs() < tol
}

pub fn select_static_points<T: Real>(
    points: &[RadarPoint<T>],
    psi: T,
    residual_tol: T,
) -> Vec<RadarPoint<T>> {
    points
        .iter()
        .copied()
        .filter(|p| is_static(p, psi, residual_tol))
        .collect()
}

/// Grid candidate with the most static points; ties go to smaller `|psi|`,
/// then to the lower candidate.
pub fn coarse_yaw_search<T: Real>(
    points: &[RadarPoint<T>],
    range: T,
    step: T,
    residual_tol: T,
) -> Result<T> {
    if points.is_empty() {
        return Err(CalibError::EmptyInput("radar points"));
    }
    if !(range > T::zero()) || !(step > T::zero()) || step > range {
        return Err(CalibError::InvalidInput(
            "grid needs 0 < step <= range".into(),
        ));
    }
    let n = ((range + range) / step + T::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0);
    let mut best: Option<(usize, T)> = None;
    for k in 0..=n {
        let psi = -range + step * T::from_count(k);
        let count = points
            .iter()
            .filter(|p| is_static(p, psi, residual_tol))
            .count();
        let better = match best {
            None => true,
            Some((c, b)) => count > c || (count == c && psi.abs() < b.abs()),
        };
        if better {
            best = Some((count, psi));
        }
    }
    match best {
        Some((c, psi)) if c > 0 => Ok(psi),
        _ => Err(CalibError::NoConsensus),
    }
}

fn cost<T: Real>(points: &[RadarPoint<T>], psi: T) -> T {
    points.iter().map(|p| cosine_residual(p, psi).powi(2)).sum()
}

/// Damped Gauss-Newton on `sum (v_r - v_g cos(theta + psi))^2`, kept within
/// `bound` of `psi_init`.
pub fn fit_cosine_yaw<T: Real>(points: &[RadarPoint<T>], psi_init: T, bound: T) -> Result<T> {
    if points.len() < 2 {
        return Err(CalibError::TooFewSamples {
            need: 2,
            got: points.len(),
        });
    }
    let (lo_az, hi_az) = points
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
            (lo.min(p.azimuth), hi.max(p.azimuth))
        });
    if hi_az - lo_az <= T::floor_tol(1e-12) {
        // One azimuth pins only cos(theta + psi); the yaw is not identifiable.
        return Err(CalibError::Unobservable);
    }
    let (lo, hi) = (psi_init - bound, psi_init + bound);
    let mut psi = psi_init;
    let mut c = cost(points, psi);
    let mut lambda = T::lit(1e-3);
    for _ in 0..100 {
        let (mut g, mut h) = (T::zero(), T::zero());
        for p in points {
            let j = p.ego_speed * (p.azimuth + psi).sin();
            g = g + j * cosine_residual(p, psi);
            h = h + j * j;
        }
        if h <= T::zero() {
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let step = -g / (h * (T::one() + lambda));
            let next = (psi + step).max(lo).min(hi);
            let nc = cost(points, next);
            if nc <= c {
                let moved = (next - psi).abs();
                psi = next;
                c = nc;
                lambda = (lambda * T::lit(0.1)).max(T::lit(1e-12));
                accepted = moved > T::zero();
                break;
            }
            lambda = lambda * T::lit(10.0);
        }
        if !accepted || g.abs() <= T::epsilon() * h.max(T::one()) {
            break;
        }
    }
    Ok(psi)
}

/// Cycles through frames: pick static points at the current yaw, fit, and
/// move a fraction `refine_gain` toward the fit. The result is the circular
/// mean of the post-burn-in trace.
pub fn refine_yaw_iterative<T: Real>(
    frames: &[Vec<RadarPoint<T>>],
    psi_init: T,
    cfg: &VelocityConfig<T>,
) -> Result<RadarVelocityEstimate<T>> {
    if cfg.iterations == 0 {
        return Err(CalibError::InvalidInput(
            "iterations must be at least one".into(),
        ));
    }
    if frames.is_empty() {
        return Err(CalibError::EmptyInput("radar frames"));
    }
    let mut psi = psi_init;
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut skipped = 0;
    for it in 0..cfg.iterations {
        let frame: Vec<RadarPoint<T>> = frames[it % frames.len()]
            .iter()
            .copied()
            .filter(|p| p.ego_speed >= cfg.min_ego_speed)
            .collect();
        let statics = select_static_points(&frame, psi, cfg.residual_tol);
        match fit_cosine_yaw(&statics, psi, cfg.search_range) {
            Ok(fit) => psi = wrap_angle(psi + cfg.refine_gain * wrap_angle(fit - psi)),
            Err(_) => skipped += 1,
        }
        trace.push(psi);
    }
    if skipped == cfg.iterations {
        return Err(CalibError::NoValidData("no frame had enough static points"));
    }
    let burn = (T::from_count(cfg.iterations) * cfg.burn_in)
        .floor()
        .to_usize()
        .unwrap_or(0)
        .min(cfg.iterations - 1);
    let yaw = circular_mean(&trace[burn..])?;
    Ok(RadarVelocityEstimate {
        yaw,
        coarse_yaw: psi_init,
        iterations: cfg.iterations,
        frames_skipped: skipped,
        trace,
    })
}

/// Coarse grid over all points, then the iterative refinement.
pub fn calibrate_radar_velocity<T: Real>(
    points: &[RadarPoint<T>],
    cfg: &VelocityConfig<T>,
) -> Result<RadarVelocityEstimate<T>> {
    let moving: Vec<RadarPoint<T>> = points
        .iter()
        .copied()
        .filter(|p| p.ego_speed >= cfg.min_ego_speed)
        .collect();
    let coarse = coarse_yaw_search(&moving, cfg.search_range, cfg.search_step, cfg.residual_tol)?;
    refine_yaw_iterative(&split_frames(points), coarse, cfg)
}
