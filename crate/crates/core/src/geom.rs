//! Planar points and poses.
//!
//! World frame: +x right, +y up, headings counter-clockwise from +x.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A 2D point or vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Vec2<T: Real> {
    pub x: T,
    pub y: T,
}

impl<T: Real> From<[T; 2]> for Vec2<T> {
    fn from(a: [T; 2]) -> Self {
        Self { x: a[0], y: a[1] }
    }
}

impl<T: Real> From<Vec2<T>> for [T; 2] {
    fn from(v: Vec2<T>) -> Self {
        [v.x, v.y]
    }
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Unit vector at heading `theta`.
    #[inline]
    pub fn from_angle(theta: T) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    #[inline]
    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    /// Rotate counter-clockwise by `theta`.
    #[inline]
    pub fn rotate(self, theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        (n > T::zero() && n.is_finite()).then(|| self * (T::one() / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unsigned angle in `[0, π]` between two non-zero vectors.
    pub fn angle_between(self, o: Self) -> T {
        self.cross(o).atan2(self.dot(o)).abs()
    }

    pub fn cast<U: Real>(self) -> Vec2<U> {
        Vec2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Arithmetic mean of a non-empty point set.
pub fn mean<T: Real>(points: &[Vec2<T>]) -> Option<Vec2<T>> {
    if points.is_empty() {
        return None;
    }
    let mut acc = Vec2::zero();
    for p in points {
        acc = acc + *p;
    }
    Some(acc * (T::one() / T::from_usize_lossy(points.len())))
}

/// Wrap an angle into `(-π, π]`.
pub fn normalize_angle<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let mut a = theta % two_pi;
    if a <= -T::PI() {
        a += two_pi;
    } else if a > T::PI() {
        a -= two_pi;
    }
    a
}

/// Planar robot pose.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Pose2D<T: Real> {
    pub x: T,
    pub y: T,
    /// Heading in `(-π, π]`.
    pub theta: T,
}

impl<T: Real> Pose2D<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    /// Pose at `position` whose heading points at `target`.
    pub fn facing(position: Vec2<T>, target: Vec2<T>) -> Self {
        let d = target - position;
        let theta = if d.norm_sq() > T::zero() { d.angle() } else { T::zero() };
        Self::new(position.x, position.y, theta)
    }

    #[inline]
    pub fn position(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    #[inline]
    pub fn heading(&self) -> Vec2<T> {
        Vec2::from_angle(self.theta)
    }

    /// Map a point from this pose's body frame into the world.
    pub fn transform(&self, local: Vec2<T>) -> Vec2<T> {
        self.position() + local.rotate(self.theta)
    }

    /// Map a world point into this pose's body frame.
    pub fn inverse_transform(&self, world: Vec2<T>) -> Vec2<T> {
        (world - self.position()).rotate(-self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angle_wraps_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(0.5 - 4.0 * PI) - 0.5).abs() < 1e-12);
        assert!((normalize_angle(2.0f32 * std::f32::consts::PI)).abs() < 1e-6);
    }

    #[test]
    fn pose_transform_round_trips() {
        let pose = Pose2D::new(1.0, -2.0, 0.7);
        let p = Vec2::new(0.3, 4.0);
        let back = pose.inverse_transform(pose.transform(p));
        assert!(back.dist(p) < 1e-12);
    }

    #[test]
    fn facing_points_at_target() {
        let pose = Pose2D::facing(Vec2::new(0.0, 0.0), Vec2::new(0.0, 2.0));
        assert!((pose.theta - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn angle_between_is_unsigned() {
        let a = Vec2::new(1.0f64, 0.0);
        assert!((a.angle_between(Vec2::from_angle(-1.0)) - 1.0).abs() < 1e-12);
        assert!((a.angle_between(Vec2::new(-1.0, 0.0)) - PI).abs() < 1e-12);
    }
}
