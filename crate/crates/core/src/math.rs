//! Small vector and quaternion types used throughout the scene model.
//!
//! Scenes are y-up: the floor plane is spanned by x and z.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Component-wise product.
    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scale(s)
    }
}

/// Rotation quaternion with scalar part `w`.
///
/// SSR documents store `rot` as `[x, y, z, w]` (scalar last); see
/// [`Quaternion::from_xyzw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_xyzw(a: [f64; 4]) -> Self {
        Self::new(a[3], a[0], a[1], a[2])
    }

    pub fn to_xyzw(self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    /// Rotation by `angle` radians about +y (right-handed).
    pub fn from_yaw(angle: f64) -> Self {
        let h = 0.5 * angle;
        Self::new(h.cos(), 0.0, h.sin(), 0.0)
    }

    /// Exact yaw by a multiple of 90 degrees.
    pub fn from_quarter_turns(turns: u8) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match turns % 4 {
            0 => Self::IDENTITY,
            1 => Self::new(s, 0.0, s, 0.0),
            2 => Self::new(0.0, 0.0, 1.0, 0.0),
            _ => Self::new(s, 0.0, -s, 0.0),
        }
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    /// Hamilton product `self * rhs` (apply `rhs` first, then `self`).
    pub fn compose(self, rhs: Quaternion) -> Quaternion {
        let (a, b) = (self, rhs);
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotates `v` by this (unit) quaternion.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v).scale(2.0);
        v + t.scale(self.w) + u.cross(t)
    }

    /// True when both quaternions encode the same rotation (q and -q).
    pub fn same_rotation(self, o: Quaternion, tol: f64) -> bool {
        let d = (self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z).abs();
        (1.0 - d).abs() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn yaw_matrix(theta: f64, v: Vec3) -> Vec3 {
        let (s, c) = theta.sin_cos();
        Vec3::new(c * v.x + s * v.z, v.y, -s * v.x + c * v.z)
    }

    #[test]
    fn yaw_matches_rotation_matrix() {
        for deg in [0.0, 30.0, 90.0, 145.0, 270.0] {
            let t = f64::to_radians(deg);
            let v = Vec3::new(1.0, 0.5, 2.0);
            let a = Quaternion::from_yaw(t).rotate(v);
            let b = yaw_matrix(t, v);
            assert!((a - b).norm() < 1e-12, "{deg}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn quarter_turn_positive_yaw() {
        let p = Quaternion::from_quarter_turns(1).rotate(Vec3::new(1.0, 0.0, 2.0));
        assert!((p - Vec3::new(2.0, 0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn xyzw_order() {
        let q = Quaternion::from_xyzw([0.0, 0.0, 0.0, 1.0]);
        assert_eq!(q, Quaternion::IDENTITY);
        assert_eq!(q.to_xyzw(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn compose_accumulates_angles() {
        let a = Quaternion::from_yaw(0.3).compose(Quaternion::from_yaw(0.4));
        assert!(a.same_rotation(Quaternion::from_yaw(0.7), 1e-12));
    }
}
