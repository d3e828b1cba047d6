//! Small fixed-size vector algebra and sketch frames.

use crate::seq::SketchPlane;
use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];
/// Row-major 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist2(a: Vec3, b: Vec3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn mat_t_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

fn snapped_sin_cos(theta: f64) -> (f64, f64) {
    let snap = |v: f64| {
        if v.abs() < 1e-15 {
            0.0
        } else if (v.abs() - 1.0).abs() < 1e-15 {
            v.signum()
        } else {
            v
        }
    };
    let (s, c) = theta.sin_cos();
    (snap(s), snap(c))
}

/// `Rz(a) * Ry(b) * Rx(c)`: Z-Y-X intrinsic Euler angles.
///
/// Trigonometric values within 1e-15 of 0 or ±1 are snapped so that multiples
/// of `pi/2` give exact axis-aligned rotations.
pub fn euler_zyx_matrix(a: f64, b: f64, c: f64) -> Mat3 {
    let (sa, ca) = snapped_sin_cos(a);
    let (sb, cb) = snapped_sin_cos(b);
    let (sc, cc) = snapped_sin_cos(c);
    [
        [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
        [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
        [-sb, cb * sc, cb * cc],
    ]
}

/// Inverse of [`euler_zyx_matrix`] for a rotation matrix; `c = 0` at gimbal lock.
pub fn euler_zyx_from_matrix(m: &Mat3) -> [f64; 3] {
    let b = (-m[2][0]).clamp(-1.0, 1.0).asin();
    if b.cos().abs() > 1e-9 {
        [m[1][0].atan2(m[0][0]), b, m[2][1].atan2(m[2][2])]
    } else {
        [(-m[0][1]).atan2(m[1][1]), b, 0.0]
    }
}

/// Rigid placement of a sketch: `world = origin + R * local`, with the
/// sketch in the local XY plane and the extrusion direction along local Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: Vec3,
    pub rotation: Mat3,
}

impl Frame {
    pub const IDENTITY: Frame = Frame {
        origin: [0.0; 3],
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn new(origin: Vec3, rotation: Mat3) -> Self {
        Frame { origin, rotation }
    }

    pub fn from_plane(plane: &SketchPlane) -> Self {
        let o = plane.origin.map(|q| q.signed());
        let [a, b, c] = plane.orientation.map(|q| q.angle());
        Frame {
            origin: o,
            rotation: euler_zyx_matrix(a, b, c),
        }
    }

    pub fn to_world(&self, local: Vec3) -> Vec3 {
        add(self.origin, mat_vec(&self.rotation, local))
    }

    pub fn to_local(&self, world: Vec3) -> Vec3 {
        mat_t_vec(&self.rotation, sub(world, self.origin))
    }

    /// World direction of a local direction.
    pub fn dir(&self, local: Vec3) -> Vec3 {
        mat_vec(&self.rotation, local)
    }

    pub fn normal(&self) -> Vec3 {
        [
            self.rotation[0][2],
            self.rotation[1][2],
            self.rotation[2][2],
        ]
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: [f64::INFINITY; 3],
        max: [f64::NEG_INFINITY; 3],
    };

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Aabb {
        let mut b = Aabb::EMPTY;
        for p in pts {
            b.include(*p);
        }
        b
    }

    pub fn include(&mut self, p: Vec3) {
        for (k, v) in p.into_iter().enumerate() {
            self.min[k] = self.min[k].min(v);
            self.max[k] = self.max[k].max(v);
        }
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        let mut b = *self;
        b.include(o.min);
        b.include(o.max);
        b
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|k| self.min[k] > self.max[k])
    }

    pub fn expanded(&self, by: f64) -> Aabb {
        Aabb {
            min: self.min.map(|v| v - by),
            max: self.max.map(|v| v + by),
        }
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= o.max[k] && o.min[k] <= self.max[k])
    }

    pub fn center(&self) -> Vec3 {
        [0, 1, 2].map(|k| 0.5 * (self.min[k] + self.max[k]))
    }

    pub fn size(&self) -> Vec3 {
        [0, 1, 2].map(|k| self.max[k] - self.min[k])
    }

    pub fn longest_edge(&self) -> f64 {
        let s = self.size();
        s[0].max(s[1]).max(s[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| (a[i][j] - b[i][j]).abs() <= tol))
    }

    #[test]
    fn all_minus_pi_is_identity() {
        assert_eq!(euler_zyx_matrix(-PI, -PI, -PI), Frame::IDENTITY.rotation);
        assert_eq!(euler_zyx_matrix(PI, PI, PI), Frame::IDENTITY.rotation);
        assert_eq!(
            Frame::from_plane(&SketchPlane::world_xy()).rotation,
            Frame::IDENTITY.rotation
        );
    }

    #[test]
    fn euler_round_trip() {
        for &(a, b, c) in &[(0.3, -0.4, 1.2), (-2.0, 1.0, 0.1), (3.0, -1.5, -2.9)] {
            let m = euler_zyx_matrix(a, b, c);
            let [a2, b2, c2] = euler_zyx_from_matrix(&m);
            assert!(close(&m, &euler_zyx_matrix(a2, b2, c2), 1e-12));
        }
        let m = euler_zyx_matrix(0.7, PI / 2.0, 0.0);
        let [a2, b2, c2] = euler_zyx_from_matrix(&m);
        assert!(close(&m, &euler_zyx_matrix(a2, b2, c2), 1e-9));
    }

    #[test]
    fn rotation_is_orthonormal() {
        let m = euler_zyx_matrix(0.3, -0.4, 1.2);
        let f = Frame::new([1.0, 2.0, 3.0], m);
        let p = [0.2, -0.7, 0.9];
        let back = f.to_local(f.to_world(p));
        assert!(dist2(back, p) < 1e-28);
        assert!((norm(f.normal()) - 1.0).abs() < 1e-14);
    }
}
