//! Rotation representations and axis-angle construction.
//!
//! Vehicle frame: x forward, y left, z up. Euler angles are intrinsic
//! Z-Y-X: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`. With this convention a
//! positive pitch turns the sensor nose down and a positive roll raises its
//! left side.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::real::Real;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::TAU();
    let mut w = a - two_pi * (a / two_pi).round();
    if w <= -T::PI() {
        w = w + two_pi;
    } else if w > T::PI() {
        w = w - two_pi;
    }
    w
}

/// Clamps a cosine before `acos`.
#[inline]
pub fn safe_acos<T: Real>(c: T) -> T {
    c.max(-T::one()).min(T::one()).acos()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Real>(&self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Direction vector with unit norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec3<T>", try_from = "Vec3<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct UnitVec3<T>(Vec3<T>);

impl<T: Real> UnitVec3<T> {
    /// Accepts a vector whose norm is within 1e-6 of one, then renormalizes.
    pub fn new(v: Vec3<T>) -> Result<Self> {
        let n = v.norm();
        if !v.is_finite() || (n - T::one()).abs() > T::floor_tol(1e-6) {
            return Err(CalibError::InvalidInput(format!(
                "axis norm {} is not unit",
                n.to_f64_lossy()
            )));
        }
        Ok(Self(v.scale(T::one() / n)))
    }

    /// Normalizes any non-zero finite vector.
    pub fn normalize(v: Vec3<T>) -> Result<Self> {
        let n = v.norm();
        if !v.is_finite() || n <= T::min_positive_value() {
            return Err(CalibError::InvalidInput(
                "cannot normalize a zero vector".into(),
            ));
        }
        Ok(Self(v.scale(T::one() / n)))
    }

    pub fn z_axis() -> Self {
        Self(Vec3::new(T::zero(), T::zero(), T::one()))
    }

    pub fn into_inner(self) -> Vec3<T> {
        self.0
    }

    pub fn as_vec(&self) -> &Vec3<T> {
        &self.0
    }
}

impl<T: Real> From<UnitVec3<T>> for Vec3<T> {
    fn from(u: UnitVec3<T>) -> Self {
        u.0
    }
}

impl<T: Real> TryFrom<Vec3<T>> for UnitVec3<T> {
    type Error = CalibError;
    fn try_from(v: Vec3<T>) -> Result<Self> {
        Self::new(v)
    }
}

/// 3x3 rotation matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotMat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> RotMat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn rot_x(a: T) -> Self {
        let (s, c, o, z) = (a.sin(), a.cos(), T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, c, -s], [z, s, c]],
        }
    }

    pub fn rot_y(a: T) -> Self {
        let (s, c, o, z) = (a.sin(), a.cos(), T::one(), T::zero());
        Self {
            m: [[c, z, s], [z, o, z], [-s, z, c]],
        }
    }

    pub fn rot_z(a: T) -> Self {
        let (s, c, o, z) = (a.sin(), a.cos(), T::one(), T::zero());
        Self {
            m: [[c, -s, z], [s, c, z], [z, z, o]],
        }
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn apply(&self, v: &Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3::from_array(self.m[i])
    }

    pub fn col(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn determinant(&self) -> T {
        self.row(0).dot(&self.row(1).cross(&self.row(2)))
    }

    /// Largest entry of `|R^T R - I|`.
    pub fn orthonormality_error(&self) -> T {
        let p = self.transpose() * *self;
        let mut worst = T::zero();
        for (i, row) in p.m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    /// Intrinsic Z-Y-X Euler angles. Pitch is clamped at the gimbal poles.
    pub fn to_euler(&self) -> EulerYPR<T> {
        let m = &self.m;
        let pitch = -(m[2][0].max(-T::one()).min(T::one())).asin();
        let yaw = m[1][0].atan2(m[0][0]);
        let roll = m[2][1].atan2(m[2][2]);
        EulerYPR::new(wrap_angle(yaw), wrap_angle(pitch), wrap_angle(roll))
    }

    /// Heading of the body x-axis projected onto the world xy-plane.
    pub fn forward_heading(&self) -> T {
        self.m[1][0].atan2(self.m[0][0])
    }

    /// From a Hamilton unit quaternion `(w, x, y, z)`. The quaternion is
    /// normalized first.
    pub fn from_quaternion(q: [T; 4]) -> Result<Self> {
        let n = q.iter().fold(T::zero(), |a, &c| a + c * c).sqrt();
        if !n.is_finite() || n <= T::min_positive_value() {
            return Err(CalibError::InvalidInput("zero quaternion".into()));
        }
        let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
        let two = T::lit(2.0);
        let o = T::one();
        Ok(Self {
            m: [
                [
                    o - two * (y * y + z * z),
                    two * (x * y - w * z),
                    two * (x * z + w * y),
                ],
                [
                    two * (x * y + w * z),
                    o - two * (x * x + z * z),
                    two * (y * z - w * x),
                ],
                [
                    two * (x * z - w * y),
                    two * (y * z + w * x),
                    o - two * (x * x + y * y),
                ],
            ],
        })
    }

    /// Hamilton quaternion `(w, x, y, z)` with `w >= 0`.
    pub fn to_quaternion(&self) -> [T; 4] {
        let m = &self.m;
        let one = T::one();
        let quarter = T::lit(0.25);
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > T::zero() {
            let s = (trace + one).sqrt() * T::lit(2.0);
            [
                quarter * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            ]
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (one + m[0][0] - m[1][1] - m[2][2]).sqrt() * T::lit(2.0);
            [
                (m[2][1] - m[1][2]) / s,
                quarter * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            ]
        } else if m[1][1] > m[2][2] {
            let s = (one + m[1][1] - m[0][0] - m[2][2]).sqrt() * T::lit(2.0);
            [
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                quarter * s,
                (m[1][2] + m[2][1]) / s,
            ]
        } else {
            let s = (one + m[2][2] - m[0][0] - m[1][1]).sqrt() * T::lit(2.0);
            [
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                quarter * s,
            ]
        };
        if q[0] < T::zero() {
            [-q[0], -q[1], -q[2], -q[3]]
        } else {
            q
        }
    }
}

impl<T: Real> Mul for RotMat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        Self { m }
    }
}

/// Yaw, pitch and roll in radians (intrinsic Z-Y-X).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerYPR<T> {
    pub yaw: T,
    pub pitch: T,
    pub roll: T,
}

impl<T: Real> EulerYPR<T> {
    pub fn new(yaw: T, pitch: T, roll: T) -> Self {
        Self { yaw, pitch, roll }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_degrees(yaw: T, pitch: T, roll: T) -> Self {
        Self::new(yaw.to_radians(), pitch.to_radians(), roll.to_radians())
    }

    pub fn to_matrix(&self) -> RotMat3<T> {
        RotMat3::rot_z(self.yaw) * RotMat3::rot_y(self.pitch) * RotMat3::rot_x(self.roll)
    }

    /// Roll and pitch only, yaw dropped.
    pub fn tilt_matrix(&self) -> RotMat3<T> {
        RotMat3::rot_y(self.pitch) * RotMat3::rot_x(self.roll)
    }

    pub fn wrapped(&self) -> Self {
        Self::new(
            wrap_angle(self.yaw),
            wrap_angle(self.pitch),
            wrap_angle(self.roll),
        )
    }
}

/// Axis-angle to matrix: `cos a I + (1 - cos a) n n^T + sin a [n]x`.
///
/// Fails when `axis` is not unit within 1e-6 or `angle` is not finite.
pub fn rodrigues<T: Real>(axis: Vec3<T>, angle: T) -> Result<RotMat3<T>> {
    if !angle.is_finite() {
        return Err(CalibError::InvalidInput(
            "rotation angle is not finite".into(),
        ));
    }
    let n = UnitVec3::new(axis)?.into_inner();
    let (s, c) = angle.sin_cos();
    let k = T::one() - c;
    let nn = [n.x, n.y, n.z];
    let skew = [
        [T::zero(), -n.z, n.y],
        [n.z, T::zero(), -n.x],
        [-n.y, n.x, T::zero()],
    ];
    let mut m = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { c } else { T::zero() };
            m[i][j] = id + k * nn[i] * nn[j] + s * skew[i][j];
        }
    }
    Ok(RotMat3 { m })
}

/// Minimal rotation taking `from` onto `to`, as `(axis, angle)`.
///
/// Parallel inputs give angle zero about the fixed axis `(0, 0, 1)`;
/// antiparallel inputs are rejected.
pub fn rotation_between<T: Real>(from: &UnitVec3<T>, to: &UnitVec3<T>) -> Result<(UnitVec3<T>, T)> {
    let (a, b) = (from.as_vec(), to.as_vec());
    let cross = a.cross(b);
    let cos = a.dot(b);
    if cross.norm() < T::floor_tol(1e-9) {
        if cos > T::zero() {
            return Ok((UnitVec3::z_axis(), T::zero()));
        }
        return Err(CalibError::Antiparallel);
    }
    Ok((UnitVec3::normalize(cross)?, safe_acos(cos)))
}
