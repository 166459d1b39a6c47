//! Camera-to-vehicle rotation from the road vanishing point and the
//! horizon line.
//!
//! Pixel frame: u right, v down. Camera optical axes: x right, y down,
//! z forward. The vanishing point is back-projected to a unit direction
//! `r = K^-1 p / |K^-1 p|`, and the per-frame angles are
//!
//! ```text
//! yaw_c = asin(r2),  pitch_c = -atan(r1 / r3),  roll = theta_HL
//! ```
//!
//! in the optical frame. [`mount_from_camera_angles`] maps them onto the
//! vehicle Euler triple through the fixed axis permutation
//! optical (z, x, y) -> vehicle (x, -y, -z), undoing roll exactly.
//!
//! The horizon angle is measured counter-clockwise from the image u-axis
//! with v pointing up, so a camera whose left side is raised reports a
//! positive angle.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circular::{circular_mean, circular_std};
use crate::error::{CalibError, Result};
use crate::geom::{wrap_angle, EulerYPR, RotMat3, Vec3};
use crate::real::Real;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct Intrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    #[serde(default = "zero")]
    pub skew: T,
}

fn zero<T: Real>() -> T {
    T::zero()
}

impl<T: Real> Intrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, skew: T) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            skew,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.fx, self.fy, self.cx, self.cy, self.skew]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.fx <= T::zero() || self.fy <= T::zero() {
            return Err(CalibError::InvalidInput(
                "intrinsics need finite values and fx, fy > 0".into(),
            ));
        }
        Ok(())
    }

    /// `K^-1 [u, v, 1]^T`.
    pub fn back_project(&self, u: T, v: T) -> Vec3<T> {
        let yn = (v - self.cy) / self.fy;
        let xn = (u - self.cx - self.skew * yn) / self.fx;
        Vec3::new(xn, yn, T::one())
    }

    /// Pixel of a direction in optical coordinates; `None` behind the camera.
    pub fn project(&self, d: &Vec3<T>) -> Option<(T, T)> {
        if d.z <= T::zero() {
            return None;
        }
        let (xn, yn) = (d.x / d.z, d.y / d.z);
        Some((
            self.fx * xn + self.skew * yn + self.cx,
            self.fy * yn + self.cy,
        ))
    }
}

/// One frame of detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VPObservation<T> {
    pub t: T,
    pub vp: (T, T),
    pub hl_theta: T,
}

/// Image line segment between two pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSeg2D<T> {
    pub p1: (T, T),
    pub p2: (T, T),
}

impl<T: Real> LineSeg2D<T> {
    /// Endpoints must be finite and at least one pixel apart.
    pub fn new(p1: (T, T), p2: (T, T)) -> Result<Self> {
        let len = (p2.0 - p1.0).hypot(p2.1 - p1.1);
        if !len.is_finite() || len < T::one() {
            return Err(CalibError::InvalidInput(
                "line segment shorter than one pixel".into(),
            ));
        }
        Ok(Self { p1, p2 })
    }

    /// `p1 x p2` in homogeneous pixel coordinates.
    pub fn homogeneous(&self) -> [T; 3] {
        let (u1, v1) = self.p1;
        let (u2, v2) = self.p2;
        [v1 - v2, u2 - u1, u1 * v2 - u2 * v1]
    }
}

fn dot3<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3<T: Real>(a: &[T; 3]) -> T {
    dot3(a, a).sqrt()
}

/// `|l . p| / (|l| |p|)` for a homogeneous line and point.
pub fn line_vp_distance<T: Real>(line: &[T; 3], vp: &[T; 3]) -> Result<T> {
    let denom = norm3(line) * norm3(vp);
    if !(denom > T::zero()) || !denom.is_finite() {
        return Err(CalibError::InvalidInput("zero-norm line or point".into()));
    }
    Ok(dot3(line, vp).abs() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineLabel {
    Passing,
    NotPassing,
}

/// Passing iff the distance is strictly below `d_th`.
pub fn classify_line<T: Real>(line: &LineSeg2D<T>, vp: &[T; 3], d_th: T) -> LineLabel {
    match line_vp_distance(&line.homogeneous(), vp) {
        Ok(d) if d < d_th => LineLabel::Passing,
        _ => LineLabel::NotPassing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpConsensus<T> {
    pub vp: (T, T),
    pub inlier_count: usize,
}

fn intersect<T: Real>(a: &[T; 3], b: &[T; 3]) -> Option<(T, T)> {
    let h = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let n = norm3(&h);
    if !(n > T::zero()) || h[2].abs() <= T::floor_tol(1e-12) * n {
        return None;
    }
    Some((h[0] / h[2], h[1] / h[2]))
}

fn score<T: Real>(lines: &[[T; 3]], vp: (T, T), d_th: T) -> (usize, T) {
    let p = [vp.0, vp.1, T::one()];
    lines
        .iter()
        .fold((0, T::zero()), |(n, s), l| match line_vp_distance(l, &p) {
            Ok(d) if d < d_th => (n + 1, s + d),
            _ => (n, s),
        })
}

/// Least-squares intersection of lines normalized to unit `(a, b)`.
fn least_squares_point<T: Real>(lines: &[&[T; 3]]) -> Option<(T, T)> {
    let (mut saa, mut sab, mut sbb, mut sac, mut sbc) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for l in lines {
        let s = l[0].hypot(l[1]);
        if s <= T::zero() {
            continue;
        }
        let (a, b, c) = (l[0] / s, l[1] / s, l[2] / s);
        saa = saa + a * a;
        sab = sab + a * b;
        sbb = sbb + b * b;
        sac = sac + a * c;
        sbc = sbc + b * c;
    }
    let det = saa * sbb - sab * sab;
    if det.abs() <= T::floor_tol(1e-12) * (saa + sbb) * (saa + sbb) {
        return None;
    }
    Some((
        (-sac * sbb + sbc * sab) / det,
        (-sbc * saa + sac * sab) / det,
    ))
}

fn better<T: Real>(a: (usize, T), b: (usize, T)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Consensus vanishing point over line pairs.
///
/// Each hypothesis is the intersection of two lines, scored by the number of
/// lines within `d_th` (ties: smaller summed distance). The winner is refined
/// by a least-squares intersection of its inliers. All pairs are tried when
/// there are no more than `iterations` of them; otherwise `iterations` random
/// pairs are drawn from `rng_seed`.
pub fn estimate_vp_from_lines<T: Real>(
    lines: &[LineSeg2D<T>],
    d_th: T,
    iterations: usize,
    rng_seed: u64,
) -> Result<VpConsensus<T>> {
    if lines.len() < 2 {
        return Err(CalibError::TooFewSamples {
            need: 2,
            got: lines.len(),
        });
    }
    let hom: Vec<[T; 3]> = lines.iter().map(|l| l.homogeneous()).collect();
    let n = hom.len();
    let pairs: Vec<(usize, usize)> = if n * (n - 1) / 2 <= iterations {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        (0..iterations)
            .map(|_| {
                let s = sample(&mut rng, n, 2);
                (s.index(0), s.index(1))
            })
            .collect()
    };

    let mut best: Option<((T, T), (usize, T))> = None;
    for (i, j) in pairs {
        let Some(vp) = intersect(&hom[i], &hom[j]) else {
            continue;
        };
        let s = score(&hom, vp, d_th);
        if best.is_none_or(|(_, bs)| better(s, bs)) {
            best = Some((vp, s));
        }
    }
    let (mut vp, mut s) = best.ok_or(CalibError::DegenerateHypothesis)?;

    let p = [vp.0, vp.1, T::one()];
    let inliers: Vec<&[T; 3]> = hom
        .iter()
        .filter(|l| line_vp_distance(l, &p).is_ok_and(|d| d < d_th))
        .collect();
    if inliers.len() >= 2 {
        if let Some(refined) = least_squares_point(&inliers) {
            let rs = score(&hom, refined, d_th);
            if rs.0 >= s.0 {
                vp = refined;
                s = rs;
            }
        }
    }
    Ok(VpConsensus {
        vp,
        inlier_count: s.0,
    })
}

/// Angles of the back-projected vanishing point in the optical frame:
/// `(asin(r2), -atan(r1 / r3))`.
pub fn vp_to_yaw_pitch<T: Real>(vp: (T, T), k: &Intrinsics<T>) -> Result<(T, T)> {
    let d = k.back_project(vp.0, vp.1);
    let n = d.norm();
    if !(n > T::zero()) || !n.is_finite() {
        return Err(CalibError::InvalidInput(
            "vanishing point is not finite".into(),
        ));
    }
    let r = d.scale(T::one() / n);
    if r.z <= T::lit(1e-6) {
        return Err(CalibError::BehindCamera);
    }
    if r.y.abs() > T::one() - T::floor_tol(1e-9) {
        return Err(CalibError::ArcsinDomain);
    }
    Ok((r.y.asin(), -(r.x / r.z).atan()))
}

/// Roll equals the horizon-line angle, wrapped to `(-pi/2, pi/2]`.
pub fn roll_from_hl<T: Real>(hl_theta: T) -> T {
    let half = T::FRAC_PI_2();
    let mut r = wrap_angle(hl_theta);
    if r > half {
        r = r - T::PI();
    } else if r <= -half {
        r = r + T::PI();
    }
    r
}

/// Vehicle-frame mount angles from the optical-frame VP angles and roll.
///
/// Rebuilds the unit road direction from the optical angles, permutes it to
/// body axes, removes roll, and reads yaw and pitch of the intrinsic Z-Y-X
/// triple. Exact for any mount in front of the camera.
pub fn mount_from_camera_angles<T: Real>(yaw_c: T, pitch_c: T, roll: T) -> EulerYPR<T> {
    let (sy, cy) = yaw_c.sin_cos();
    let (sp, cp) = pitch_c.sin_cos();
    let r = Vec3::new(-cy * sp, sy, cy * cp);
    let body = Vec3::new(r.z, -r.x, -r.y);
    let d = RotMat3::rot_x(roll).apply(&body);
    let yaw = (-d.y).max(-T::one()).min(T::one()).asin();
    let pitch = d.z.atan2(d.x);
    EulerYPR::new(wrap_angle(yaw), wrap_angle(pitch), roll)
}

/// Per-frame mount estimate.
pub fn frame_mount<T: Real>(obs: &VPObservation<T>, k: &Intrinsics<T>) -> Result<EulerYPR<T>> {
    let (yaw_c, pitch_c) = vp_to_yaw_pitch(obs.vp, k)?;
    Ok(mount_from_camera_angles(
        yaw_c,
        pitch_c,
        roll_from_hl(obs.hl_theta),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraEstimate<T> {
    pub t: T,
    pub roll: T,
    pub pitch: T,
    pub yaw: T,
    /// Largest of the three circular stds over the window.
    pub window_std: T,
    pub frame_count: usize,
}

/// Sliding-window dispersion gate over per-frame mount estimates.
///
/// Holds mutable state; drive one instance per stream from one thread.
#[derive(Debug, Clone)]
pub struct StabilityGate<T> {
    window_n: usize,
    threshold: T,
    window: VecDeque<EulerYPR<T>>,
    frames: usize,
}

impl<T: Real> StabilityGate<T> {
    pub fn new(window_n: usize, threshold: T) -> Result<Self> {
        if window_n < 2 {
            return Err(CalibError::InvalidInput(
                "stability window needs at least two frames".into(),
            ));
        }
        Ok(Self {
            window_n,
            threshold,
            window: VecDeque::with_capacity(window_n),
            frames: 0,
        })
    }

    /// Pushes one frame; returns the window mean when every angle's circular
    /// std is within the threshold.
    pub fn push(&mut self, t: T, angles: EulerYPR<T>) -> Option<CameraEstimate<T>> {
        self.frames += 1;
        if self.window.len() == self.window_n {
            self.window.pop_front();
        }
        self.window.push_back(angles);
        if self.window.len() < self.window_n {
            return None;
        }
        let roll: Vec<T> = self.window.iter().map(|a| a.roll).collect();
        let pitch: Vec<T> = self.window.iter().map(|a| a.pitch).collect();
        let yaw: Vec<T> = self.window.iter().map(|a| a.yaw).collect();
        let mut worst = T::zero();
        for seq in [&roll, &pitch, &yaw] {
            let s = circular_std(seq).ok()?;
            if !(s <= self.threshold) {
                return None;
            }
            worst = worst.max(s);
        }
        Some(CameraEstimate {
            t,
            roll: circular_mean(&roll).ok()?,
            pitch: circular_mean(&pitch).ok()?,
            yaw: circular_mean(&yaw).ok()?,
            window_std: worst,
            frame_count: self.frames,
        })
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.frames = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct CameraConfig<T> {
    pub window_n: usize,
    pub std_threshold: T,
    /// Line-to-VP distance threshold for the consensus estimator.
    pub d_th: T,
    pub ransac_iterations: usize,
}

impl<T: Real> Default for CameraConfig<T> {
    fn default() -> Self {
        Self {
            window_n: 100,
            std_threshold: T::lit(0.005),
            d_th: T::lit(1e-3),
            ransac_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraCalibration<T> {
    pub emissions: Vec<CameraEstimate<T>>,
    /// Circular mean of all emissions; `window_std` is the spread of the
    /// emitted means (zero for a single emission), `frame_count` the number
    /// of emissions.
    pub aggregate: CameraEstimate<T>,
    pub frames_total: usize,
    pub frames_rejected: usize,
}

/// Runs the per-frame conversion and the stability gate over a stream.
/// Frames whose VP cannot be converted are counted and skipped.
pub fn calibrate_camera<T: Real>(
    observations: &[VPObservation<T>],
    k: &Intrinsics<T>,
    cfg: &CameraConfig<T>,
) -> Result<CameraCalibration<T>> {
    k.validate()?;
    let mut gate = StabilityGate::new(cfg.window_n, cfg.std_threshold)?;
    let mut emissions = Vec::new();
    let mut rejected = 0;
    for obs in observations {
        match frame_mount(obs, k) {
            Ok(angles) => emissions.extend(gate.push(obs.t, angles)),
            Err(_) => rejected += 1,
        }
    }
    if emissions.is_empty() {
        return Err(CalibError::NoValidData("stability gate never opened"));
    }
    let spread = |f: fn(&CameraEstimate<T>) -> T| -> Result<(T, T)> {
        let v: Vec<T> = emissions.iter().map(f).collect();
        let s = if v.len() > 1 {
            circular_std(&v)?
        } else {
            T::zero()
        };
        Ok((circular_mean(&v)?, s))
    };
    let (roll, s_r) = spread(|e| e.roll)?;
    let (pitch, s_p) = spread(|e| e.pitch)?;
    let (yaw, s_y) = spread(|e| e.yaw)?;
    let aggregate = CameraEstimate {
        t: emissions.last().map_or(T::zero(), |e| e.t),
        roll,
        pitch,
        yaw,
        window_std: s_r.max(s_p).max(s_y),
        frame_count: emissions.len(),
    };
    Ok(CameraCalibration {
        emissions,
        aggregate,
        frames_total: observations.len(),
        frames_rejected: rejected,
    })
}

/// Builds one observation per timestamp from grouped line segments, using the
/// consensus estimator. The horizon angle is not observable from lines alone
/// and is set to zero.
pub fn observations_from_lines<T: Real>(
    frames: &[(T, Vec<LineSeg2D<T>>)],
    cfg: &CameraConfig<T>,
    rng_seed: u64,
) -> Vec<VPObservation<T>> {
    frames
        .iter()
        .enumerate()
        .filter_map(|(i, (t, lines))| {
            estimate_vp_from_lines(
                lines,
                cfg.d_th,
                cfg.ransac_iterations,
                derive_seed(rng_seed, i as u64),
            )
            .ok()
            .map(|c| VPObservation {
                t: *t,
                vp: c.vp,
                hl_theta: T::zero(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k() -> Intrinsics<f64> {
        Intrinsics::new(1000.0, 1000.0, 640.0, 360.0, 0.0).unwrap()
    }

    #[test]
    fn distance_incident_and_offset() {
        let l = [0.0, 1.0, -360.0];
        assert_eq!(line_vp_distance(&l, &[640.0, 360.0, 1.0]).unwrap(), 0.0);
        let d = line_vp_distance(&l, &[640.0, 370.0, 1.0]).unwrap();
        let expected = 10.0
            / ((1.0f64 + 360.0 * 360.0).sqrt() * (640.0f64 * 640.0 + 370.0 * 370.0 + 1.0).sqrt());
        assert_abs_diff_eq!(d, expected, epsilon = 1e-12);
        let scaled = line_vp_distance(&l, &[3200.0, 1850.0, 5.0]).unwrap();
        assert_abs_diff_eq!(scaled, d, epsilon = 1e-15);
        assert!(line_vp_distance(&[0.0; 3], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn classify_boundary_is_not_passing() {
        let seg = LineSeg2D::new((0.0, 360.0), (1280.0, 360.0)).unwrap();
        let vp = [640.0, 370.0, 1.0];
        let d = line_vp_distance(&seg.homogeneous(), &vp).unwrap();
        assert_eq!(classify_line(&seg, &vp, d), LineLabel::NotPassing);
        assert_eq!(classify_line(&seg, &vp, d * 1.0001), LineLabel::Passing);
        assert_eq!(
            classify_line(&seg, &[640.0, 360.0, 1.0], 1e-12),
            LineLabel::Passing
        );
    }

    #[test]
    fn short_segment_rejected() {
        assert!(LineSeg2D::new((1.0, 1.0), (1.5, 1.2)).is_err());
    }

    #[test]
    fn vp_on_principal_point() {
        let (y, p) = vp_to_yaw_pitch((640.0, 360.0), &k()).unwrap();
        assert_eq!((y, p), (0.0, 0.0));
    }

    #[test]
    fn vp_horizontal_shift_is_optical_pitch() {
        let (y, p) = vp_to_yaw_pitch((640.0 + 1000.0 * 0.1f64.tan(), 360.0), &k()).unwrap();
        assert_abs_diff_eq!(y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p, -0.1, epsilon = 1e-12);
    }

    #[test]
    fn vp_vertical_shift_is_optical_yaw() {
        let (y, p) = vp_to_yaw_pitch((640.0, 360.0 + 1000.0 * 0.2f64.tan()), &k()).unwrap();
        assert_abs_diff_eq!(y, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn vp_behind_camera() {
        // Any pixel back-projects in front; a huge skew-free offset only
        // approaches the image plane, so exercise the guard with r3 ~ 0.
        assert_eq!(
            vp_to_yaw_pitch((1e12, 360.0), &k()),
            Err(CalibError::BehindCamera)
        );
    }

    #[test]
    fn roll_identity_and_wrap() {
        assert_eq!(roll_from_hl(0.0), 0.0);
        assert_eq!(roll_from_hl(0.05), 0.05);
        assert_eq!(roll_from_hl(-0.1), -0.1);
        assert_abs_diff_eq!(
            roll_from_hl(std::f64::consts::PI - 0.1),
            -0.1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mount_conversion_single_axis() {
        // Pure optical pitch maps to negative vehicle yaw; pure optical yaw to
        // negative vehicle pitch.
        let e = mount_from_camera_angles(0.0, -0.1, 0.0);
        assert_abs_diff_eq!(e.yaw, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(e.pitch, 0.0, epsilon = 1e-15);
        let e = mount_from_camera_angles(0.2, 0.0, 0.0);
        assert_abs_diff_eq!(e.pitch, -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(e.yaw, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn consensus_on_concurrent_lines() {
        let lines: Vec<_> = (0..10)
            .map(|i| {
                let a = 0.3 + i as f64 * 0.25;
                LineSeg2D::new(
                    (640.0, 360.0),
                    (640.0 + 300.0 * a.cos(), 360.0 + 300.0 * a.sin()),
                )
                .unwrap()
            })
            .collect();
        let c = estimate_vp_from_lines(&lines, 1e-3, 200, 7).unwrap();
        assert_eq!(c.inlier_count, 10);
        assert_abs_diff_eq!(c.vp.0, 640.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c.vp.1, 360.0, epsilon = 1e-6);
    }

    #[test]
    fn consensus_parallel_pair_is_degenerate() {
        let lines = vec![
            LineSeg2D::new((0.0, 0.0), (100.0, 0.0)).unwrap(),
            LineSeg2D::new((0.0, 10.0), (100.0, 10.0)).unwrap(),
        ];
        assert_eq!(
            estimate_vp_from_lines(&lines, 1e-3, 10, 1),
            Err(CalibError::DegenerateHypothesis)
        );
        assert!(matches!(
            estimate_vp_from_lines(&lines[..1], 1e-3, 10, 1),
            Err(CalibError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn gate_constant_stream() {
        let mut gate = StabilityGate::new(100, 0.005).unwrap();
        let a = EulerYPR::new(0.01, -0.02, 0.03);
        for i in 0..150 {
            let out = gate.push(i as f64, a);
            if i < 99 {
                assert!(out.is_none());
            } else {
                let e = out.expect("gate should be open");
                assert!(e.window_std < 1e-15);
                assert_abs_diff_eq!(e.yaw, 0.01, epsilon = 1e-15);
                assert_eq!(e.frame_count, i + 1);
            }
        }
        assert!(StabilityGate::new(1, 0.1).is_err());
    }
}
