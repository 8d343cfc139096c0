//! Small fixed-size geometry used by the scene: vectors, rotations and
//! uniform-scale rigid transforms.
//!
//! World units are meters. Transforms apply scale first, then rotation, then
//! translation.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > f64::EPSILON && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation quaternion. Every constructor and product renormalizes, so the
/// norm stays within 1e-6 of one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes raw components; falls back to identity for a zero or
    /// non-finite input.
    pub fn from_components(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > f64::EPSILON) {
            return Self::IDENTITY;
        }
        Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    /// Rotation of `angle` radians about `axis` (right-handed).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let Some(a) = axis.normalized() else {
            return Self::IDENTITY;
        };
        let (s, c) = (angle * 0.5).sin_cos();
        Self::from_components(c, a.x * s, a.y * s, a.z * s)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self * o`, renormalized.
    pub fn mul(self, o: UnitQuat) -> UnitQuat {
        let (a, b) = (self, o);
        UnitQuat::from_components(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotates `v` (v' = q v q*), expanded form.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(t)
    }

    /// Row-major 3x3 rotation matrix.
    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let UnitQuat { w, x, y, z } = self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Uniform-scale similarity transform: `p' = position + rotation * (scale * p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub position: Vec3,
    pub rotation: UnitQuat,
    pub scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        position: Vec3::ZERO,
        rotation: UnitQuat::IDENTITY,
        scale: 1.0,
    };

    pub fn new(position: Vec3, rotation: UnitQuat, scale: f64) -> Self {
        Self {
            position,
            rotation,
            scale,
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            position: t,
            ..Self::IDENTITY
        }
    }

    pub fn from_rotation(r: UnitQuat) -> Self {
        Self {
            rotation: r,
            ..Self::IDENTITY
        }
    }

    pub fn from_scale(s: f64) -> Self {
        Self {
            scale: s,
            ..Self::IDENTITY
        }
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.position + self.rotation.rotate(p * self.scale)
    }

    /// Applies only rotation and scale (for direction-like quantities).
    #[inline]
    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v * self.scale)
    }

    /// `self ∘ other`: applying the result equals applying `other` first,
    /// then `self`.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            position: self.position + self.rotation.rotate(other.position * self.scale),
            rotation: self.rotation.mul(other.rotation),
            scale: self.scale * other.scale,
        }
    }

    /// Inverse transform. `scale` must be positive.
    pub fn invert(&self) -> Transform {
        let inv_rot = self.rotation.conjugate();
        let inv_scale = 1.0 / self.scale;
        Transform {
            position: -(inv_rot.rotate(self.position) * inv_scale),
            rotation: inv_rot,
            scale: inv_scale,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite()
            && self.rotation.is_finite()
            && (self.rotation.norm() - 1.0).abs() < 1e-6
            && self.scale.is_finite()
            && self.scale > 0.0
    }

    /// Homogeneous row-major 4x4 matrix.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.to_matrix();
        let s = self.scale;
        let p = self.position;
        [
            [r[0][0] * s, r[0][1] * s, r[0][2] * s, p.x],
            [r[1][0] * s, r[1][1] * s, r[1][2] * s, p.y],
            [r[2][0] * s, r[2][1] * s, r[2][2] * s, p.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// Free-function forms matching the scene operations.
pub fn compose(a: &Transform, b: &Transform) -> Transform {
    a.compose(b)
}

pub fn invert(t: &Transform) -> Transform {
    t.invert()
}

pub fn apply(t: &Transform, p: Vec3) -> Vec3 {
    t.apply(p)
}
