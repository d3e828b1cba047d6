//! Boundary meshes of compiled models.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::frame::{self, Aabb, Vec3};
use super::model::{centroid, unit_normal, CompiledModel};
use crate::par::Exec;

/// Deepest refinement applied to faces near other prisms.
pub const MAX_SUBDIVISION: u32 = 8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|k| self.vertices[k])
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        tri_area(&self.triangle(i))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| self.triangle_area(i))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// ASCII Wavefront OBJ with 1-based face indices.
    pub fn to_obj(&self) -> String {
        let mut s = String::with_capacity(32 * (self.vertices.len() + self.triangles.len()));
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    fn from_triangles(tris: &[[Vec3; 3]]) -> Mesh {
        let mut index: HashMap<[u64; 3], usize> = HashMap::new();
        let mut mesh = Mesh::default();
        for t in tris {
            let ids = t.map(|v| {
                // -0.0 and 0.0 are the same vertex
                let key = v.map(|c| (c + 0.0).to_bits());
                *index.entry(key).or_insert_with(|| {
                    mesh.vertices.push(v);
                    mesh.vertices.len() - 1
                })
            });
            if ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2] {
                mesh.triangles.push(ids);
            }
        }
        mesh
    }
}

pub(crate) fn tri_area(t: &[Vec3; 3]) -> f64 {
    0.5 * frame::norm(frame::cross(frame::sub(t[1], t[0]), frame::sub(t[2], t[0])))
}

fn longest_edge(t: &[Vec3; 3]) -> f64 {
    (0..3)
        .map(|k| frame::dist2(t[k], t[(k + 1) % 3]).sqrt())
        .fold(0.0, f64::max)
}

fn split(t: &[Vec3; 3]) -> [[Vec3; 3]; 4] {
    let mid = |a: Vec3, b: Vec3| -> Vec3 { std::array::from_fn(|k| 0.5 * (a[k] + b[k])) };
    let (ab, bc, ca) = (mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0]));
    [[t[0], ab, ca], [ab, t[1], bc], [ca, bc, t[2]], [ab, bc, ca]]
}

struct Tessellator<'a> {
    model: &'a CompiledModel,
    boxes: Vec<Aabb>,
    subdivision: u32,
}

impl Tessellator<'_> {
    fn new(model: &CompiledModel, subdivision: u32) -> Tessellator<'_> {
        let eps = model.boundary_epsilon;
        let boxes = model
            .prisms
            .iter()
            .map(|p| p.local_box().expanded(4.0 * eps))
            .collect();
        Tessellator {
            model,
            boxes,
            subdivision,
        }
    }

    /// Whether triangle `t` of prism `owner` may meet another prism.
    fn near_other(&self, owner: usize, t: &[Vec3; 3]) -> bool {
        self.model.prisms.iter().enumerate().any(|(j, p)| {
            j != owner && {
                let local = t.map(|v| p.frame.to_local(v));
                Aabb::from_points(local.iter()).overlaps(&self.boxes[j])
            }
        })
    }

    fn faces(&self) -> Vec<(usize, [Vec3; 3])> {
        self.model
            .prisms
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.faces().into_iter().map(move |t| (i, t)))
            .filter(|(_, t)| tri_area(t) > 0.0)
            .collect()
    }

    fn refine(&self, owner: usize, t: [Vec3; 3], depth: u32, out: &mut Vec<[Vec3; 3]>) {
        if depth < self.subdivision && self.near_other(owner, &t) {
            for s in split(&t) {
                self.refine(owner, s, depth + 1, out);
            }
            return;
        }
        if let Some(kept) = self.keep(owner, t) {
            out.push(kept);
        }
    }

    /// The triangle oriented outward if its centroid lies on the boundary of
    /// the folded solid and no earlier prism already contributes that surface.
    fn keep(&self, owner: usize, t: [Vec3; 3]) -> Option<[Vec3; 3]> {
        let n = unit_normal(&t)?;
        let c = centroid(&t);
        let eps = self.model.boundary_epsilon;
        let behind = frame::sub(c, frame::scale(n, eps));
        let front = frame::add(c, frame::scale(n, eps));
        let (ib, i_f) = (self.model.contains(behind), self.model.contains(front));
        if ib == i_f {
            return None;
        }
        let (inner, outer, oriented) = if ib {
            (behind, front, t)
        } else {
            (front, behind, [t[0], t[2], t[1]])
        };
        let duplicate = self.model.prisms[..owner]
            .iter()
            .any(|p| p.contains(inner) != p.contains(outer));
        (!duplicate).then_some(oriented)
    }
}

/// Boundary mesh of the folded solid.
///
/// Every prism face is triangulated; triangles that may meet another prism
/// are split into four up to `subdivision` times, and a triangle is kept when
/// points just behind and just in front of its centroid fall on different
/// sides of the solid. Kept triangles face outward.
pub fn tessellate(model: &CompiledModel, subdivision: u32) -> Mesh {
    tessellate_with(model, subdivision, Exec::auto())
}

pub fn tessellate_with(model: &CompiledModel, subdivision: u32, exec: Exec) -> Mesh {
    let tess = Tessellator::new(model, subdivision);
    let faces = tess.faces();
    let kept = exec.flat_map(&faces, |&(owner, t)| {
        let mut out = Vec::new();
        tess.refine(owner, t, 0, &mut out);
        out
    });
    Mesh::from_triangles(&kept)
}

/// Subdivision depth that brings triangles near other prisms down to
/// `max_edge` in normalized units (longest bounding-box edge = 2).
pub fn default_subdivision(model: &CompiledModel, max_edge: f64) -> u32 {
    let tess = Tessellator::new(model, MAX_SUBDIVISION);
    let longest = tess
        .faces()
        .iter()
        .filter(|(owner, t)| tess.near_other(*owner, t))
        .map(|(_, t)| longest_edge(t))
        .fold(0.0, f64::max);
    let target = max_edge * model.aabb().longest_edge() / 2.0;
    if longest <= target || !(target > 0.0) {
        return 0;
    }
    ((longest / target).log2().ceil() as u32).min(MAX_SUBDIVISION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::model::Prism;
    use crate::geom::profile::{RealLoop, Region};
    use crate::geom::{Frame, KernelConfig};
    use crate::seq::BooleanOp;
    use std::f64::consts::PI;

    fn model(prisms: Vec<Prism>) -> CompiledModel {
        CompiledModel::from_prisms(prisms, 1e-6).unwrap()
    }

    fn cylinder(r: f64, h: f64, segments: usize) -> Prism {
        let cfg = KernelConfig {
            arc_segments: segments,
            ..KernelConfig::default()
        };
        let region = Region::from_loops(&[RealLoop::circle([0.0, 0.0], r)], &cfg).unwrap();
        Prism::new(
            region,
            Frame::IDENTITY,
            h / 2.0,
            h / 2.0,
            BooleanOp::NewBody,
        )
    }

    #[test]
    fn unit_cuboid_mesh() {
        let m = model(vec![Prism::cuboid([0.0; 3], [1.0; 3], BooleanOp::NewBody)]);
        let mesh = tessellate(&m, 0);
        assert_eq!(mesh.triangles.len(), 12);
        assert_eq!(mesh.vertices.len(), 8);
        assert!((mesh.area() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn triangles_face_outward() {
        let m = model(vec![Prism::cuboid([0.0; 3], [1.0; 3], BooleanOp::NewBody)]);
        let mesh = tessellate(&m, 0);
        for i in 0..mesh.triangles.len() {
            let t = mesh.triangle(i);
            let n = unit_normal(&t).unwrap();
            assert!(frame::dot(n, centroid(&t)) > 0.0);
        }
    }

    #[test]
    fn cylinder_area_close_to_analytic() {
        let m = model(vec![cylinder(0.5, 1.0, 64)]);
        let area = tessellate(&m, 0).area();
        let exact = 2.0 * PI * 0.5 + 2.0 * PI * 0.25;
        assert!((area - exact).abs() / exact < 0.01, "{area}");
    }

    #[test]
    fn cylinder_error_halves_when_segments_double() {
        let exact = 2.0 * PI * 0.5 + 2.0 * PI * 0.25;
        let err = |n| (tessellate(&model(vec![cylinder(0.5, 1.0, n)]), 0).area() - exact).abs();
        let mut prev = err(16);
        for n in [32, 64, 128] {
            let e = err(n);
            assert!(e <= prev / 2.0, "{n}: {e} vs {prev}");
            prev = e;
        }
    }

    #[test]
    fn through_hole_adds_channel_walls() {
        let s = 2.0;
        let m = model(vec![
            Prism::cuboid([0.0; 3], [s; 3], BooleanOp::NewBody),
            Prism::cuboid([0.0; 3], [0.5, 0.5, 4.0], BooleanOp::Cut),
        ]);
        let mesh = tessellate(&m, default_subdivision(&m, 0.05));
        // cube minus two 0.5x0.5 openings plus four 0.5x2 channel walls
        let exact = 6.0 * s * s - 2.0 * 0.25 + 4.0 * 0.5 * 2.0;
        assert!(mesh.area() > 6.0 * s * s);
        assert!(
            (mesh.area() - exact).abs() / exact < 0.01,
            "{} vs {exact}",
            mesh.area()
        );
        // the channel walls point into the channel
        let inward = (0..mesh.triangles.len()).any(|i| {
            let t = mesh.triangle(i);
            let c = centroid(&t);
            c[0].abs() < 0.26 && c[1].abs() < 0.26 && c[2].abs() < 0.9 && {
                let n = unit_normal(&t).unwrap();
                frame::dot(n, [c[0], c[1], 0.0]) < 0.0
            }
        });
        assert!(inward);
    }

    #[test]
    fn coplanar_join_counts_shared_surface_once() {
        let m = model(vec![
            Prism::cuboid([0.0; 3], [2.0, 2.0, 2.0], BooleanOp::NewBody),
            Prism::cuboid([1.0, 0.0, 0.0], [2.0, 2.0, 2.0], BooleanOp::Join),
        ]);
        let mesh = tessellate(&m, default_subdivision(&m, 0.05));
        // union is a 3x2x2 box
        let exact = 2.0 * (3.0 * 2.0 + 3.0 * 2.0 + 2.0 * 2.0);
        assert!(
            (mesh.area() - exact).abs() / exact < 0.01,
            "{}",
            mesh.area()
        );
    }

    #[test]
    fn obj_export_is_stable() {
        let m = model(vec![Prism::cuboid([0.0; 3], [1.0; 3], BooleanOp::NewBody)]);
        let a = tessellate(&m, 0).to_obj();
        let b = tessellate(&m, 0).to_obj();
        assert_eq!(a, b);
        assert_eq!(a.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(a.lines().filter(|l| l.starts_with("f ")).count(), 12);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let m = model(vec![
            cylinder(0.5, 1.0, 32),
            Prism::cuboid([0.3, 0.0, 0.0], [0.5, 0.5, 2.0], BooleanOp::Cut),
        ]);
        let a = tessellate_with(&m, 3, Exec::Sequential);
        let b = tessellate_with(&m, 3, Exec::auto());
        assert_eq!(a, b);
    }
}
