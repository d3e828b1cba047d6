//! Uniform point sampling on the boundary of a compiled model.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::Vec3;
use super::mesh::{default_subdivision, tessellate_with, tri_area, Mesh};
use super::model::{unit_normal, CompiledModel, KernelConfig};
use crate::par::Exec;

/// Redraw rounds for candidates that fail the boundary check before the
/// remaining points are accepted unchecked.
const MAX_ROUNDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub count: usize,
    pub seed: u64,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, seed: u64) -> Self {
        PointCloud {
            count: points.len(),
            points,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// ASCII PLY with one `x y z` vertex per line.
    pub fn to_ply(&self) -> String {
        let mut s = String::with_capacity(64 + 48 * self.points.len());
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "comment seed {}", self.seed);
        let _ = writeln!(s, "element vertex {}", self.points.len());
        s.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
        for p in &self.points {
            let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
        }
        s
    }
}

/// `n` points drawn uniformly by area from the model's boundary.
pub fn sample_point_cloud(model: &CompiledModel, n: usize, seed: u64) -> PointCloud {
    sample_point_cloud_with(model, n, seed, Exec::auto())
}

pub fn sample_point_cloud_with(
    model: &CompiledModel,
    n: usize,
    seed: u64,
    exec: Exec,
) -> PointCloud {
    let mesh = tessellate_with(
        model,
        default_subdivision(model, KernelConfig::default().max_edge),
        exec,
    );
    sample_mesh(model, &mesh, n, seed, exec)
}

/// Samples `mesh` (a tessellation of `model`), redrawing candidates whose
/// neighbourhood does not straddle the model's boundary. Returns an empty
/// cloud when the mesh has no area.
pub fn sample_mesh(
    model: &CompiledModel,
    mesh: &Mesh,
    n: usize,
    seed: u64,
    exec: Exec,
) -> PointCloud {
    let tris: Vec<[Vec3; 3]> = (0..mesh.triangles.len())
        .map(|i| mesh.triangle(i))
        .collect();
    let normals: Vec<Vec3> = tris
        .iter()
        .map(|t| unit_normal(t).unwrap_or([0.0; 3]))
        .collect();
    let mut cumulative = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for t in &tris {
        total += tri_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return PointCloud {
            points: Vec::new(),
            count: 0,
            seed,
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for round in 0..=MAX_ROUNDS {
        let need = n - points.len();
        if need == 0 {
            break;
        }
        let candidates: Vec<(Vec3, usize)> = (0..need)
            .map(|_| {
                let target = rng.random::<f64>() * total;
                let k = cumulative
                    .partition_point(|&c| c <= target)
                    .min(tris.len() - 1);
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let s = r1.sqrt();
                let [a, b, c] = tris[k];
                let p = std::array::from_fn(|i| {
                    (1.0 - s) * a[i] + s * (1.0 - r2) * b[i] + s * r2 * c[i]
                });
                (p, k)
            })
            .collect();
        if round == MAX_ROUNDS {
            points.extend(candidates.into_iter().map(|(p, _)| p));
            break;
        }
        let ok = exec.map(&candidates, |&(p, k)| model.straddles(p, normals[k]));
        points.extend(
            candidates
                .iter()
                .zip(ok)
                .filter(|(_, ok)| *ok)
                .map(|((p, _), _)| *p),
        );
    }
    PointCloud {
        count: points.len(),
        points,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::model::{PointClass, Prism};
    use crate::geom::tessellate;
    use crate::seq::BooleanOp;

    fn unit_cube() -> CompiledModel {
        CompiledModel::from_prisms(
            vec![Prism::cuboid([0.0; 3], [1.0; 3], BooleanOp::NewBody)],
            1e-6,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = unit_cube();
        let a = sample_point_cloud(&m, 500, 42);
        let b = sample_point_cloud(&m, 500, 42);
        assert_eq!(a, b);
        assert_eq!(a.count, 500);
        assert_ne!(a, sample_point_cloud(&m, 500, 43));
    }

    #[test]
    fn parallel_and_sequential_identical() {
        let m = unit_cube();
        assert_eq!(
            sample_point_cloud_with(&m, 300, 7, Exec::Sequential),
            sample_point_cloud_with(&m, 300, 7, Exec::auto())
        );
    }

    #[test]
    fn faces_sampled_in_proportion() {
        let m = unit_cube();
        let n = 60_000;
        let pc = sample_point_cloud(&m, n, 3);
        let mut counts = [0usize; 6];
        for p in &pc.points {
            let (axis, v) = (0..3)
                .map(|a| (a, p[a]))
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .unwrap();
            counts[2 * axis + usize::from(v > 0.0)] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 6.0).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn samples_lie_on_boundary() {
        let m = CompiledModel::from_prisms(
            vec![
                Prism::cuboid([0.0; 3], [2.0; 3], BooleanOp::NewBody),
                Prism::cuboid([0.5, 0.5, 0.5], [1.5; 3], BooleanOp::Cut),
            ],
            1e-6,
        )
        .unwrap();
        let pc = sample_point_cloud(&m, 2000, 11);
        assert_eq!(pc.count, 2000);
        assert!(pc
            .points
            .iter()
            .all(|&p| m.classify_point(p) == PointClass::Boundary));
    }

    #[test]
    fn ply_header_counts_points() {
        let m = unit_cube();
        let mesh = tessellate(&m, 0);
        let pc = sample_mesh(&m, &mesh, 10, 1, Exec::Sequential);
        let ply = pc.to_ply();
        assert!(ply.contains("element vertex 10\n"));
        assert_eq!(ply.lines().count(), 8 + 10);
    }
}
