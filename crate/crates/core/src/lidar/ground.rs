use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::geom::{rodrigues, safe_acos, EulerYPR, RotMat3, UnitVec3, Vec3};
use crate::linalg::symmetric_eigen3;
use crate::real::Real;

/// One LiDAR sweep in the sensor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloudFrame<T> {
    pub t: T,
    pub points: Vec<Vec3<T>>,
}

/// Plane `n . p + d = 0` with `n.z >= 0`, so `d > 0` for a sensor above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct PlaneModel<T> {
    pub normal: UnitVec3<T>,
    pub d: T,
    pub inlier_count: usize,
    /// RMS point-to-plane distance over the inliers.
    pub rms: T,
}

impl<T: Real> PlaneModel<T> {
    /// Plane with the normal flipped to face up. Counts are left at zero.
    pub fn upward(normal: UnitVec3<T>, d: T) -> Self {
        let n = *normal.as_vec();
        let flip = n.z < T::zero()
            || (n.z == T::zero() && (n.y < T::zero() || (n.y == T::zero() && n.x < T::zero())));
        let (n, d) = if flip { (-n, -d) } else { (n, d) };
        Self {
            normal: UnitVec3::normalize(n).unwrap_or(normal),
            d,
            inlier_count: 0,
            rms: T::zero(),
        }
    }

    pub fn signed_distance(&self, p: &Vec3<T>) -> T {
        self.normal.as_vec().dot(p) + self.d
    }

    /// Inlier count and RMS distance within `tol`.
    pub fn score(&self, points: &[Vec3<T>], tol: T) -> (usize, T) {
        let (mut n, mut ss) = (0usize, T::zero());
        for p in points {
            let r = self.signed_distance(p).abs();
            if r < tol {
                n += 1;
                ss = ss + r * r;
            }
        }
        let rms = if n > 0 {
            (ss / T::from_count(n)).sqrt()
        } else {
            T::zero()
        };
        (n, rms)
    }

    pub fn with_score(self, points: &[Vec3<T>], tol: T) -> Self {
        let (inlier_count, rms) = self.score(points, tol);
        Self {
            inlier_count,
            rms,
            ..self
        }
    }

    pub fn inliers(&self, points: &[Vec3<T>], tol: T) -> Vec<Vec3<T>> {
        points
            .iter()
            .copied()
            .filter(|p| self.signed_distance(p).abs() < tol)
            .collect()
    }

    fn beats(&self, other: &Self) -> bool {
        self.inlier_count > other.inlier_count
            || (self.inlier_count == other.inlier_count && self.rms < other.rms)
    }
}

/// Keeps points whose planar range `sqrt(x^2 + y^2)` lies in `[r_min, r_max]`.
pub fn filter_points<T: Real>(
    frame: &PointCloudFrame<T>,
    r_min: T,
    r_max: T,
) -> PointCloudFrame<T> {
    let points = frame
        .points
        .iter()
        .copied()
        .filter(|p| {
            let r = p.x.hypot(p.y);
            r >= r_min && r <= r_max
        })
        .collect();
    PointCloudFrame { t: frame.t, points }
}

fn plane_through<T: Real>(a: &Vec3<T>, b: &Vec3<T>, c: &Vec3<T>) -> Option<PlaneModel<T>> {
    let (u, v) = (*b - *a, *c - *a);
    let n = u.cross(&v);
    let nn = n.norm();
    if !(nn > T::floor_tol(1e-12) * u.norm() * v.norm()) {
        return None;
    }
    let n = n.scale(T::one() / nn);
    let unit = UnitVec3::normalize(n).ok()?;
    Some(PlaneModel::upward(unit, -n.dot(a)))
}

/// Best plane over `runs` independent RANSAC passes of `iterations` minimal
/// samples each, ranked by inlier count and then RMS.
pub fn ransac_plane_multi<T: Real>(
    points: &[Vec3<T>],
    runs: usize,
    iterations: usize,
    inlier_tol: T,
    rng_seed: u64,
) -> Result<PlaneModel<T>> {
    if points.len() < 3 {
        return Err(CalibError::TooFewSamples {
            need: 3,
            got: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<PlaneModel<T>> = None;
    for _run in 0..runs.max(1) {
        let mut run_best: Option<PlaneModel<T>> = None;
        for _ in 0..iterations.max(1) {
            let idx = sample(&mut rng, points.len(), 3);
            let Some(candidate) = plane_through(
                &points[idx.index(0)],
                &points[idx.index(1)],
                &points[idx.index(2)],
            ) else {
                continue;
            };
            let candidate = candidate.with_score(points, inlier_tol);
            if run_best.as_ref().is_none_or(|b| candidate.beats(b)) {
                run_best = Some(candidate);
            }
        }
        if let Some(rb) = run_best {
            if best.as_ref().is_none_or(|b| rb.beats(b)) {
                best = Some(rb);
            }
        }
    }
    best.ok_or(CalibError::Collinear)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct RefineConfig<T> {
    /// Largest tilt of a perturbed normal in the first round, radians.
    pub angle_range: T,
    /// Largest intercept shift in the first round, meters.
    pub d_range: T,
    pub samples: usize,
    pub rounds: usize,
    /// Each round's ranges are the previous ones times this factor.
    pub shrink: T,
}

impl<T: Real> Default for RefineConfig<T> {
    fn default() -> Self {
        Self {
            angle_range: T::lit(0.5f64.to_radians()),
            d_range: T::lit(0.05),
            samples: 100,
            rounds: 3,
            shrink: T::lit(0.5),
        }
    }
}

fn orthonormal_pair<T: Real>(n: &Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let helper = if n.x.abs() < T::lit(0.9) {
        Vec3::new(T::one(), T::zero(), T::zero())
    } else {
        Vec3::new(T::zero(), T::one(), T::zero())
    };
    let e1 = n.cross(&helper);
    let e1 = e1.scale(T::one() / e1.norm());
    (e1, n.cross(&e1))
}

/// Random search around `plane`: each round draws `samples` planes whose
/// normals are tilted uniformly within a cone and whose intercepts are
/// shifted uniformly, then re-centres on the best. A candidate replaces the
/// centre only with strictly more inliers, so the count never decreases.
pub fn refine_plane_random_search<T: Real>(
    points: &[Vec3<T>],
    plane: &PlaneModel<T>,
    cfg: &RefineConfig<T>,
    inlier_tol: T,
    rng_seed: u64,
) -> PlaneModel<T> {
    refine_plane_traced(points, plane, cfg, inlier_tol, rng_seed).0
}

/// As [`refine_plane_random_search`], also returning the inlier count after
/// each round.
pub fn refine_plane_traced<T: Real>(
    points: &[Vec3<T>],
    plane: &PlaneModel<T>,
    cfg: &RefineConfig<T>,
    inlier_tol: T,
    rng_seed: u64,
) -> (PlaneModel<T>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best = plane.with_score(points, inlier_tol);
    if best.inlier_count < plane.inlier_count {
        // Keep the caller's plane if it was scored with a looser tolerance.
        best = *plane;
    }
    let mut trace = Vec::with_capacity(cfg.rounds);
    let (mut angle_range, mut d_range) = (cfg.angle_range, cfg.d_range);
    for _ in 0..cfg.rounds {
        let centre = best;
        let n = *centre.normal.as_vec();
        let (e1, e2) = orthonormal_pair(&n);
        for _ in 0..cfg.samples {
            let tilt = angle_range * T::lit(rng.random::<f64>()).sqrt();
            let dir = T::lit(rng.random::<f64>()) * T::TAU();
            let axis = e1.scale(dir.cos()) + e2.scale(dir.sin());
            let Ok(rot) = rodrigues(axis, tilt) else {
                continue;
            };
            let Ok(normal) = UnitVec3::normalize(rot.apply(&n)) else {
                continue;
            };
            let d = centre.d + d_range * (T::lit(2.0) * T::lit(rng.random::<f64>()) - T::one());
            let candidate = PlaneModel::upward(normal, d).with_score(points, inlier_tol);
            if candidate.inlier_count > best.inlier_count {
                best = candidate;
            }
        }
        trace.push(best.inlier_count);
        angle_range = angle_range * cfg.shrink;
        d_range = d_range * cfg.shrink;
    }
    (best, trace)
}

/// Total least squares plane: through the centroid, normal along the
/// smallest principal direction. Every input point counts as an inlier.
pub fn svd_plane_fit<T: Real>(points: &[Vec3<T>]) -> Result<PlaneModel<T>> {
    if points.len() < 3 {
        return Err(CalibError::TooFewSamples {
            need: 3,
            got: points.len(),
        });
    }
    let inv = T::one() / T::from_count(points.len());
    let c = points
        .iter()
        .fold(Vec3::zeros(), |acc, p| acc + *p)
        .scale(inv);
    let mut cov = [[T::zero(); 3]; 3];
    for p in points {
        let q = (*p - c).to_array();
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] = cov[i][j] + q[i] * q[j];
            }
        }
    }
    let (vals, vecs) = symmetric_eigen3(cov);
    if !(vals[1] > T::floor_tol(1e-12) * vals[2]) || !vals[2].is_finite() {
        return Err(CalibError::RankDeficient);
    }
    let n = Vec3::new(vecs[0][0], vecs[1][0], vecs[2][0]);
    let unit = UnitVec3::normalize(n)?;
    let plane = PlaneModel::upward(unit, -unit.as_vec().dot(&c));
    let ss: T = points
        .iter()
        .map(|p| plane.signed_distance(p).powi(2))
        .sum();
    Ok(PlaneModel {
        inlier_count: points.len(),
        rms: (ss * inv).sqrt(),
        ..plane
    })
}

/// Rotation taking the plane normal onto +z, and the intercept along the
/// sensor z-axis `d / c`.
pub fn plane_to_rotation_height<T: Real>(plane: &PlaneModel<T>) -> Result<(RotMat3<T>, T)> {
    let n = *plane.normal.as_vec();
    if !(n.z > T::lit(0.5)) {
        return Err(CalibError::NotGroundPlane(n.z.to_f64_lossy()));
    }
    let z_axis = Vec3::new(T::zero(), T::zero(), T::one());
    let axis = n.cross(&z_axis);
    let s = axis.norm();
    let rot = if s <= T::floor_tol(1e-15) {
        RotMat3::identity()
    } else {
        rodrigues(axis.scale(T::one() / s), safe_acos(n.dot(&z_axis)))?
    };
    Ok((rot, plane.d / n.z))
}

/// Roll and pitch (yaw zero) of the ground rotation, plus height.
pub fn plane_tilt<T: Real>(plane: &PlaneModel<T>) -> Result<(EulerYPR<T>, T)> {
    let (rot, z) = plane_to_rotation_height(plane)?;
    let e = rot.to_euler();
    Ok((EulerYPR::new(T::zero(), e.pitch, e.roll), z))
}
