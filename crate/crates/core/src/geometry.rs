//! Small geometric primitives shared by every module.

use serde::{Deserialize, Serialize};

/// 3-vector in a local east-north-up frame, meters (or m/s for velocities).
pub type Vec3 = nalgebra::Vector3<f64>;

/// A position in the local east-north-up frame. `z` is height above ground.
pub type Point3 = Vec3;

/// Axis-aligned box given by its min and max corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Self {
        Self { min, max }
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// True when the open interiors intersect.
    pub fn interiors_overlap(&self, other: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] < other.max[a] && other.min[a] < self.max[a])
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance_to(&self, p: &Point3) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let excess = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                0.0
            };
            d2 += excess * excess;
        }
        d2.sqrt()
    }
}

/// Horizontal (x, y) distance between two points.
pub fn horizontal_distance(a: &Point3, b: &Point3) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = angle.rem_euclid(tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let r = wrap_two_pi(angle + pi) - pi;
    if r <= -pi {
        r + std::f64::consts::TAU
    } else {
        r
    }
}

/// Heading of a velocity vector: radians from east, counter-clockwise, in `[0, 2π)`.
pub fn heading_of(v: &Vec3) -> f64 {
    wrap_two_pi(v.y.atan2(v.x))
}

/// Rotates the horizontal part of `v` counter-clockwise by `angle`, keeping `z`.
pub fn rotate_horizontal(v: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

pub fn horizontal(v: &Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrapping() {
        assert!((wrap_two_pi(-PI / 2.0) - 1.5 * PI).abs() < 1e-12);
        assert!((wrap_pi(1.5 * PI) + 0.5 * PI).abs() < 1e-12);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-12);
        assert!((heading_of(&Vec3::new(0.0, -1.0, 0.0)) - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn box_distance() {
        let b = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(b.distance_to(&Vec3::new(0.5, 0.5, 0.5)), 0.0);
        assert!((b.distance_to(&Vec3::new(4.0, 5.0, 0.5)) - 5.0).abs() < 1e-12);
    }
}
