//! Planar trajectory splines and the quantities derived from them: heading,
//! speed, per-axis curvature, valid timestamps and straight segments.

mod bspline;
mod segments;

pub use bspline::BSpline;
pub use segments::{extract_straight_segments, SegmentConfig, StraightSegment};

use serde::{Deserialize, Serialize};

use crate::circular::{circular_mean, circular_std};
use crate::error::{CalibError, Result};
use crate::geom::{wrap_angle, RotMat3, Vec3};
use crate::real::Real;

/// Timestamped 6-DoF pose of a sensor in a world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose6D<T> {
    pub t: T,
    pub position: Vec3<T>,
    /// Sensor-to-world rotation.
    pub rotation: RotMat3<T>,
}

impl<T: Real> Pose6D<T> {
    pub fn to_sample(&self) -> PoseSample<T> {
        PoseSample {
            t: self.t,
            x: self.position.x,
            y: self.position.y,
            z: self.position.z,
            yaw_sensor: self.rotation.forward_heading(),
        }
    }

    /// Sample whose yaw is read after removing a known sensor tilt, i.e. from
    /// `R * tilt^T`, so the heading is taken in a frame levelled to the ground.
    pub fn to_levelled_sample(&self, tilt: &RotMat3<T>) -> PoseSample<T> {
        let levelled = self.rotation * tilt.transpose();
        PoseSample {
            yaw_sensor: levelled.forward_heading(),
            ..self.to_sample()
        }
    }
}

/// Position and sensor yaw at one timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample<T> {
    pub t: T,
    pub x: T,
    pub y: T,
    pub z: T,
    /// Direction of the sensor forward axis in the world xy-plane.
    pub yaw_sensor: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitMode<T> {
    Interpolate,
    /// Penalized least squares with a second-difference roughness weight.
    Smooth {
        lambda: T,
    },
}

/// Per-axis B-splines of planar position over time.
#[derive(Debug, Clone)]
pub struct TrajectorySpline<T> {
    x: BSpline<T>,
    y: BSpline<T>,
    dx: BSpline<T>,
    dy: BSpline<T>,
    ddx: BSpline<T>,
    ddy: BSpline<T>,
}

fn check_samples<T: Real>(samples: &[PoseSample<T>], need: usize) -> Result<()> {
    if samples.len() < need {
        return Err(CalibError::TooFewSamples {
            need,
            got: samples.len(),
        });
    }
    for (i, s) in samples.iter().enumerate() {
        if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
            return Err(CalibError::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
    }
    if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
        return Err(CalibError::DuplicateTimestamp(i + 1));
    }
    Ok(())
}

/// Interpolating fit of degree `degree`.
pub fn fit_spline<T: Real>(
    samples: &[PoseSample<T>],
    degree: usize,
) -> Result<TrajectorySpline<T>> {
    fit_spline_with(samples, degree, FitMode::Interpolate)
}

pub fn fit_spline_with<T: Real>(
    samples: &[PoseSample<T>],
    degree: usize,
    mode: FitMode<T>,
) -> Result<TrajectorySpline<T>> {
    if degree == 0 {
        return Err(CalibError::InvalidInput(
            "spline degree must be positive".into(),
        ));
    }
    check_samples(samples, degree + 1)?;
    let t: Vec<T> = samples.iter().map(|s| s.t).collect();
    let xs: Vec<T> = samples.iter().map(|s| s.x).collect();
    let ys: Vec<T> = samples.iter().map(|s| s.y).collect();
    let lambda = match mode {
        FitMode::Interpolate => None,
        FitMode::Smooth { lambda } => Some(lambda),
    };
    let x = bspline::fit_coefficients(&t, &xs, degree, lambda)?;
    let y = bspline::fit_coefficients(&t, &ys, degree, lambda)?;
    Ok(TrajectorySpline::from_axes(x, y))
}

impl<T: Real> TrajectorySpline<T> {
    pub fn from_axes(x: BSpline<T>, y: BSpline<T>) -> Self {
        let dx = x.derivative();
        let dy = y.derivative();
        let ddx = dx.derivative();
        let ddy = dy.derivative();
        Self {
            x,
            y,
            dx,
            dy,
            ddx,
            ddy,
        }
    }

    pub fn degree(&self) -> usize {
        self.x.degree()
    }

    pub fn domain(&self) -> (T, T) {
        self.x.domain()
    }

    fn check(&self, t: T) -> Result<()> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(CalibError::OutOfDomain {
                t: t.to_f64_lossy(),
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        Ok(())
    }

    pub fn position(&self, t: T) -> Result<(T, T)> {
        self.check(t)?;
        Ok((self.x.eval(t), self.y.eval(t)))
    }

    pub fn velocity(&self, t: T) -> Result<(T, T)> {
        self.check(t)?;
        Ok((self.dx.eval(t), self.dy.eval(t)))
    }

    pub fn acceleration(&self, t: T) -> Result<(T, T)> {
        self.check(t)?;
        Ok((self.ddx.eval(t), self.ddy.eval(t)))
    }

    /// Direction of travel `atan2(y', x')`.
    pub fn heading_at(&self, t: T) -> Result<T> {
        let (vx, vy) = self.velocity(t)?;
        if vx * vx + vy * vy < T::floor_tol(1e-8) {
            return Err(CalibError::Standstill(t.to_f64_lossy()));
        }
        Ok(wrap_angle(vy.atan2(vx)))
    }

    /// `x'^2 + y'^2`, the squared speed.
    pub fn speed_sq_at(&self, t: T) -> Result<T> {
        let (vx, vy) = self.velocity(t)?;
        Ok(vx * vx + vy * vy)
    }

    /// Per-axis curvature `|x''| / (1 + x'^2)^(3/2)` and likewise for y.
    pub fn curvature_components_at(&self, t: T) -> Result<(T, T)> {
        let (vx, vy) = self.velocity(t)?;
        let (ax, ay) = self.acceleration(t)?;
        let e = T::lit(1.5);
        Ok((
            ax.abs() / (T::one() + vx * vx).powf(e),
            ay.abs() / (T::one() + vy * vy).powf(e),
        ))
    }
}

/// Speed and curvature thresholds for admitting a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct GateConfig<T> {
    /// Minimum squared speed, (m/s)^2.
    pub v_min_sq: T,
    /// Maximum per-axis curvature.
    pub c_max: T,
}

impl<T: Real> Default for GateConfig<T> {
    fn default() -> Self {
        Self {
            v_min_sq: T::lit(9.0),
            c_max: T::lit(0.01),
        }
    }
}

/// Ordered timestamps that passed the gates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidSet<T>(pub Vec<T>);

impl<T> ValidSet<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn timestamps(&self) -> &[T] {
        &self.0
    }
}

/// Timestamps with `speed_sq >= v_min_sq` and `max(cx, cy) <= c_max`.
/// Timestamps outside the spline domain are skipped.
pub fn valid_set<T: Real>(
    spline: &TrajectorySpline<T>,
    timestamps: &[T],
    gates: &GateConfig<T>,
) -> ValidSet<T> {
    let keep = |t: T| -> bool {
        let (Ok(v), Ok((cx, cy))) = (spline.speed_sq_at(t), spline.curvature_components_at(t))
        else {
            return false;
        };
        v >= gates.v_min_sq && cx.max(cy) <= gates.c_max
    };
    ValidSet(timestamps.iter().copied().filter(|&t| keep(t)).collect())
}

/// Spline and gate settings shared by the trajectory-based yaw estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct HeadingConfig<T> {
    pub degree: usize,
    pub fit: FitMode<T>,
    pub gates: GateConfig<T>,
}

impl<T: Real> Default for HeadingConfig<T> {
    fn default() -> Self {
        Self {
            degree: 3,
            fit: FitMode::Interpolate,
            gates: GateConfig::default(),
        }
    }
}

/// Mean difference between sensor yaw and trajectory heading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YawOffset<T> {
    pub offset: T,
    pub used_count: usize,
    /// Circular std of the per-timestamp differences, zero for one sample.
    pub dispersion: T,
    /// Timestamps that contributed.
    pub valid: ValidSet<T>,
}

/// Circular mean over the valid set of `wrap(yaw_sensor - heading)`.
pub fn estimate_yaw_offset<T: Real>(
    samples: &[PoseSample<T>],
    cfg: &HeadingConfig<T>,
) -> Result<YawOffset<T>> {
    let spline = fit_spline_with(samples, cfg.degree, cfg.fit)?;
    let times: Vec<T> = samples.iter().map(|s| s.t).collect();
    let valid = valid_set(&spline, &times, &cfg.gates);
    let mut diffs = Vec::with_capacity(valid.len());
    let mut used = Vec::with_capacity(valid.len());
    let mut j = 0;
    for &t in valid.timestamps() {
        while samples[j].t < t {
            j += 1;
        }
        if let Ok(h) = spline.heading_at(t) {
            diffs.push(wrap_angle(samples[j].yaw_sensor - h));
            used.push(t);
        }
    }
    if diffs.is_empty() {
        return Err(CalibError::NoValidData(
            "no timestamps passed the speed and curvature gates",
        ));
    }
    let offset = circular_mean(&diffs)?;
    let dispersion = if diffs.len() > 1 {
        circular_std(&diffs)?
    } else {
        T::zero()
    };
    Ok(YawOffset {
        offset,
        used_count: diffs.len(),
        dispersion,
        valid: ValidSet(used),
    })
}
