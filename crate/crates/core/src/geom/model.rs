//! Prisms, the implicit CSG model and sequence compilation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::frame::{self, Aabb, Frame, Vec3};
use super::mesh::{default_subdivision, tessellate_with};
use super::polygon::P2;
use super::profile::{build_sketch_region, Region};
use crate::par::Exec;
use crate::seq::{
    validate_syntax, BooleanOp, CadSequence, Diagnostic, DiagnosticCode, Layout, Location,
};

/// Kernel tolerances and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    /// Chords used for a full circle; arcs use a proportional share.
    pub arc_segments: usize,
    /// Largest accepted gap between a loop's last endpoint and its start.
    pub closure_epsilon: f64,
    /// Smallest accepted loop area.
    pub area_epsilon: f64,
    /// Distance under which a point counts as lying on the boundary.
    pub boundary_epsilon: f64,
    /// Grid probes used to decide whether the solid is empty.
    pub empty_probes: usize,
    /// Target longest triangle edge after normalization.
    pub max_edge: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            arc_segments: 64,
            closure_epsilon: 2.0 / 255.0,
            area_epsilon: 1e-6,
            boundary_epsilon: 1e-6,
            empty_probes: 4096,
            max_edge: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{code} at {location}: {detail}")]
pub struct KernelError {
    pub code: DiagnosticCode,
    pub detail: String,
    pub location: Location,
}

impl KernelError {
    pub fn new(code: DiagnosticCode, detail: impl Into<String>, location: Location) -> Self {
        KernelError {
            code,
            detail: detail.into(),
            location,
        }
    }

    /// Diagnostic whose span points at the offending element in `layout`.
    pub fn to_diagnostic(&self, layout: &Layout) -> Diagnostic {
        Diagnostic::new(
            self.code,
            layout.span_of(self.location),
            self.detail.clone(),
        )
        .with_location(self.location)
    }
}

impl From<Diagnostic> for KernelError {
    fn from(d: Diagnostic) -> Self {
        KernelError {
            code: d.code,
            detail: d.message,
            location: d.location.unwrap_or(Location::Sequence),
        }
    }
}

/// Membership of a point relative to a solid. Ordered from inside to outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PointClass {
    Inside,
    Boundary,
    Outside,
}

impl PointClass {
    /// Class with respect to the complement of the solid.
    pub fn complement(self) -> Self {
        match self {
            PointClass::Inside => PointClass::Outside,
            PointClass::Boundary => PointClass::Boundary,
            PointClass::Outside => PointClass::Inside,
        }
    }

    fn of(sd: f64, eps: f64) -> Self {
        if sd < -eps {
            PointClass::Inside
        } else if sd > eps {
            PointClass::Outside
        } else {
            PointClass::Boundary
        }
    }
}

/// A planar region swept along its frame's local Z axis from `-extent_neg` to `extent_pos`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prism {
    pub region: Region,
    pub frame: Frame,
    pub extent_pos: f64,
    pub extent_neg: f64,
    pub boolean: BooleanOp,
    #[serde(skip)]
    bounds: (P2, P2),
}

impl Prism {
    pub fn new(
        region: Region,
        frame: Frame,
        extent_pos: f64,
        extent_neg: f64,
        boolean: BooleanOp,
    ) -> Self {
        let bounds = region.bounds();
        Prism {
            region,
            frame,
            extent_pos,
            extent_neg,
            boolean,
            bounds,
        }
    }

    /// Axis-aligned box `[-w/2, w/2] x [-d/2, d/2] x [-h/2, h/2]` translated by `center`.
    pub fn cuboid(center: Vec3, size: Vec3, boolean: BooleanOp) -> Self {
        let [w, d, h] = size;
        let region = Region {
            outer: vec![
                [-w / 2.0, -d / 2.0],
                [w / 2.0, -d / 2.0],
                [w / 2.0, d / 2.0],
                [-w / 2.0, d / 2.0],
            ],
            holes: Vec::new(),
        };
        Prism::new(
            region,
            Frame::new(center, Frame::IDENTITY.rotation),
            h / 2.0,
            h / 2.0,
            boolean,
        )
    }

    /// Bounding box in the prism's local frame.
    pub fn local_box(&self) -> Aabb {
        let (lo, hi) = self.bounds;
        Aabb {
            min: [lo[0], lo[1], -self.extent_neg],
            max: [hi[0], hi[1], self.extent_pos],
        }
    }

    pub fn aabb(&self) -> Aabb {
        let b = self.local_box();
        let mut out = Aabb::EMPTY;
        for p in self.region.outer.iter() {
            for z in [b.min[2], b.max[2]] {
                out.include(self.frame.to_world([p[0], p[1], z]));
            }
        }
        out
    }

    /// Signed distance in the prism's own geometry (negative inside), exact
    /// for extrusions of a polygon region. Returns early with a value of the
    /// right sign when the point is farther than `cutoff` from the prism.
    fn signed_distance(&self, p: Vec3, cutoff: f64) -> f64 {
        let local = self.frame.to_local(p);
        let w = local[2];
        let da = (-self.extent_neg - w).max(w - self.extent_pos);
        if da > cutoff {
            return da;
        }
        let (lo, hi) = self.bounds;
        let out_x = (lo[0] - local[0]).max(local[0] - hi[0]);
        let out_y = (lo[1] - local[1]).max(local[1] - hi[1]);
        if out_x.max(out_y) > cutoff {
            return out_x.max(out_y);
        }
        let d2 = self.region.signed_distance([local[0], local[1]]);
        if d2 <= 0.0 && da <= 0.0 {
            d2.max(da)
        } else {
            d2.max(0.0).hypot(da.max(0.0))
        }
    }

    /// Membership with a boundary band of half-width `eps`.
    pub fn classify(&self, p: Vec3, eps: f64) -> PointClass {
        PointClass::of(self.signed_distance(p, eps), eps)
    }

    /// Strict membership: the point is in the open interior.
    pub fn contains(&self, p: Vec3) -> bool {
        self.signed_distance(p, 0.0) < 0.0
    }

    /// Boundary triangles `(a, b, c)` in world coordinates, counter-clockwise
    /// seen from outside.
    pub fn faces(&self) -> Vec<[Vec3; 3]> {
        let (zt, zb) = (self.extent_pos, -self.extent_neg);
        let w = |p: P2, z: f64| self.frame.to_world([p[0], p[1], z]);
        let mut out = Vec::new();
        for [a, b, c] in self.region.triangulate() {
            out.push([w(a, zt), w(b, zt), w(c, zt)]);
            out.push([w(a, zb), w(c, zb), w(b, zb)]);
        }
        if zt > zb {
            for lp in self.region.loops() {
                let n = lp.len();
                for i in 0..n {
                    let (p, q) = (lp[i], lp[(i + 1) % n]);
                    out.push([w(p, zb), w(q, zb), w(q, zt)]);
                    out.push([w(p, zb), w(q, zt), w(p, zt)]);
                }
            }
        }
        out
    }

    /// The prism under `x -> scale * x + translation`.
    pub fn transformed(&self, sim: &Similarity) -> Prism {
        Prism::new(
            self.region.scaled(sim.scale),
            Frame::new(sim.apply(self.frame.origin), self.frame.rotation),
            self.extent_pos * sim.scale,
            self.extent_neg * sim.scale,
            self.boolean,
        )
    }
}

/// Uniform scale followed by a translation: `x -> scale * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub scale: f64,
    pub translation: Vec3,
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        scale: 1.0,
        translation: [0.0; 3],
    };

    pub fn apply(&self, p: Vec3) -> Vec3 {
        frame::add(frame::scale(p, self.scale), self.translation)
    }

    /// Largest deviation from the identity over the unit cube.
    pub fn distance_from_identity(&self) -> f64 {
        let t = self.translation.iter().map(|v| v.abs()).fold(0.0, f64::max);
        (self.scale - 1.0).abs() + t
    }
}

/// Ordered prisms whose solid is the left fold of their boolean operations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompiledModel {
    pub prisms: Vec<Prism>,
    pub boundary_epsilon: f64,
}

impl CompiledModel {
    /// Wraps prisms, checking that the first one starts a body.
    pub fn from_prisms(prisms: Vec<Prism>, boundary_epsilon: f64) -> Result<Self, KernelError> {
        match prisms.first() {
            None => Err(KernelError::new(
                DiagnosticCode::EmptyResult,
                "no prisms",
                Location::Sequence,
            )),
            Some(p) if p.boolean != BooleanOp::NewBody => Err(KernelError::new(
                DiagnosticCode::BooleanViolation,
                format!("first operation is {} instead of NEW", p.boolean),
                Location::Extrude { extrude: 0 },
            )),
            Some(_) => Ok(CompiledModel {
                prisms,
                boundary_epsilon,
            }),
        }
    }

    fn fold(&self, p: Vec3, eps: f64) -> PointClass {
        let mut acc = PointClass::Outside;
        for (i, prism) in self.prisms.iter().enumerate() {
            let c = prism.classify(p, eps);
            acc = match prism.boolean {
                _ if i == 0 => c,
                BooleanOp::NewBody | BooleanOp::Join => acc.min(c),
                BooleanOp::Cut => acc.max(c.complement()),
                BooleanOp::Intersect => acc.max(c),
            };
        }
        acc
    }

    /// Membership in the folded solid with the model's boundary band.
    pub fn classify_point(&self, p: Vec3) -> PointClass {
        self.fold(p, self.boundary_epsilon)
    }

    /// Strict membership in the open interior of the folded solid.
    pub fn contains(&self, p: Vec3) -> bool {
        self.fold(p, 0.0) == PointClass::Inside
    }

    /// Whether the folded solid's boundary passes between `p - eps*n` and `p + eps*n`
    /// with the interior on the `-n` side.
    pub fn straddles(&self, p: Vec3, n: Vec3) -> bool {
        let eps = self.boundary_epsilon;
        self.contains(frame::sub(p, frame::scale(n, eps)))
            && !self.contains(frame::add(p, frame::scale(n, eps)))
    }

    /// Union of the prism bounding boxes.
    pub fn aabb(&self) -> Aabb {
        self.prisms
            .iter()
            .fold(Aabb::EMPTY, |acc, p| acc.union(&p.aabb()))
    }

    pub fn transformed(&self, sim: &Similarity) -> CompiledModel {
        CompiledModel {
            prisms: self.prisms.iter().map(|p| p.transformed(sim)).collect(),
            boundary_epsilon: self.boundary_epsilon,
        }
    }

    /// Whether some probe point lies strictly inside the solid.
    pub fn has_interior(&self, probes: usize, exec: Exec) -> bool {
        let bb = self.aabb();
        if bb.is_empty() {
            return false;
        }
        let g = ((probes as f64).cbrt().round() as usize).max(1);
        let size = bb.size();
        let grid = exec.map_range(g * g * g, |k| {
            let idx = [k % g, (k / g) % g, k / (g * g)];
            let p: Vec3 =
                std::array::from_fn(|a| bb.min[a] + size[a] * (idx[a] as f64 + 0.5) / g as f64);
            self.fold(p, self.boundary_epsilon) == PointClass::Inside
        });
        if grid.into_iter().any(|b| b) {
            return true;
        }
        // Thin solids can slip between grid probes; also probe just inside every face.
        let depth = 16.0 * self.boundary_epsilon;
        let faces: Vec<[Vec3; 3]> = self.prisms.iter().flat_map(|p| p.faces()).collect();
        exec.map(&faces, |t| {
            let Some(n) = unit_normal(t) else {
                return false;
            };
            let c = centroid(t);
            self.fold(frame::sub(c, frame::scale(n, depth)), self.boundary_epsilon)
                == PointClass::Inside
        })
        .into_iter()
        .any(|b| b)
    }
}

pub(crate) fn centroid(t: &[Vec3; 3]) -> Vec3 {
    std::array::from_fn(|a| (t[0][a] + t[1][a] + t[2][a]) / 3.0)
}

pub(crate) fn unit_normal(t: &[Vec3; 3]) -> Option<Vec3> {
    let n = frame::cross(frame::sub(t[1], t[0]), frame::sub(t[2], t[0]));
    let len = frame::norm(n);
    (len > 0.0).then(|| frame::scale(n, 1.0 / len))
}

/// Membership of `p` in the model's folded solid.
pub fn classify_point(model: &CompiledModel, p: Vec3) -> PointClass {
    model.classify_point(p)
}

/// Rescales the model so its bounding box is centered at the origin with
/// longest edge 2. The box is measured on the boundary mesh of the folded solid.
pub fn normalize(model: &CompiledModel) -> (CompiledModel, Similarity) {
    normalize_with(model, KernelConfig::default().max_edge, Exec::auto())
}

pub fn normalize_with(
    model: &CompiledModel,
    max_edge: f64,
    exec: Exec,
) -> (CompiledModel, Similarity) {
    let mesh = tessellate_with(model, default_subdivision(model, max_edge), exec);
    let mut bb = Aabb::from_points(mesh.vertices.iter());
    if bb.is_empty() {
        bb = model.aabb();
    }
    let longest = bb.longest_edge();
    if !(longest > 0.0 && longest.is_finite()) {
        return (model.clone(), Similarity::IDENTITY);
    }
    let scale = 2.0 / longest;
    let translation = frame::scale(bb.center(), -scale);
    let sim = Similarity { scale, translation };
    (model.transformed(&sim), sim)
}

/// Compiles a sequence into a normalized model.
pub fn compile_sequence(seq: &CadSequence) -> Result<CompiledModel, KernelError> {
    compile_sequence_with(seq, &KernelConfig::default(), Exec::auto())
}

pub fn compile_sequence_with(
    seq: &CadSequence,
    cfg: &KernelConfig,
    exec: Exec,
) -> Result<CompiledModel, KernelError> {
    let model = compile_unnormalized(seq, cfg, exec)?;
    Ok(normalize_with(&model, cfg.max_edge, exec).0)
}

/// Compiles a sequence without the final normalization.
pub fn compile_unnormalized(
    seq: &CadSequence,
    cfg: &KernelConfig,
    exec: Exec,
) -> Result<CompiledModel, KernelError> {
    if let Some(d) = validate_syntax(seq).into_iter().next() {
        return Err(d.into());
    }
    let mut regions: HashMap<usize, Region> = HashMap::new();
    let mut prisms = Vec::with_capacity(seq.extrudes.len());
    for op in &seq.extrudes {
        let region = match regions.get(&op.sketch_index) {
            Some(r) => r.clone(),
            None => {
                let r = build_sketch_region(&seq.sketches[op.sketch_index], op.sketch_index, cfg)?;
                regions.insert(op.sketch_index, r.clone());
                r
            }
        };
        prisms.push(Prism::new(
            region.scaled(op.sketch_scale.unit()),
            Frame::from_plane(&op.plane),
            op.extent_pos.unit(),
            op.extent_neg.unit(),
            op.boolean,
        ));
    }
    let model = CompiledModel::from_prisms(prisms, cfg.boundary_epsilon)?;
    if !model.has_interior(cfg.empty_probes, exec) {
        let last = seq.extrudes.len().saturating_sub(1);
        return Err(KernelError::new(
            DiagnosticCode::EmptyResult,
            "the boolean program leaves no solid material",
            Location::Extrude { extrude: last },
        ));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::{golden_square, parse_sequence};

    fn cube(c: Vec3, s: f64, op: BooleanOp) -> Prism {
        Prism::cuboid(c, [s, s, s], op)
    }

    #[test]
    fn cuboid_membership() {
        let m = CompiledModel::from_prisms(vec![cube([0.0; 3], 1.0, BooleanOp::NewBody)], 1e-6)
            .unwrap();
        assert_eq!(m.classify_point([0.0; 3]), PointClass::Inside);
        assert_eq!(m.classify_point([10.0, 0.0, 0.0]), PointClass::Outside);
        assert_eq!(m.classify_point([0.5, 0.1, 0.2]), PointClass::Boundary);
        assert_eq!(m.classify_point([0.5, 0.5, 0.5]), PointClass::Boundary);
    }

    #[test]
    fn nested_cut_leaves_center_outside() {
        let m = CompiledModel::from_prisms(
            vec![
                cube([0.0; 3], 2.0, BooleanOp::NewBody),
                cube([0.0; 3], 1.0, BooleanOp::Cut),
            ],
            1e-6,
        )
        .unwrap();
        assert_eq!(m.classify_point([0.0; 3]), PointClass::Outside);
        assert_eq!(m.classify_point([0.75, 0.0, 0.0]), PointClass::Inside);
        assert_eq!(m.classify_point([0.5, 0.0, 0.0]), PointClass::Boundary);
    }

    #[test]
    fn intersect_and_join() {
        let a = cube([0.0; 3], 2.0, BooleanOp::NewBody);
        let b = cube([1.0, 0.0, 0.0], 2.0, BooleanOp::Intersect);
        let m = CompiledModel::from_prisms(vec![a.clone(), b], 1e-6).unwrap();
        assert_eq!(m.classify_point([0.5, 0.0, 0.0]), PointClass::Inside);
        assert_eq!(m.classify_point([-0.5, 0.0, 0.0]), PointClass::Outside);
        let j = cube([3.0, 0.0, 0.0], 1.0, BooleanOp::Join);
        let m = CompiledModel::from_prisms(vec![a, j], 1e-6).unwrap();
        assert_eq!(m.classify_point([3.0, 0.0, 0.0]), PointClass::Inside);
        assert_eq!(m.classify_point([2.0, 0.0, 0.0]), PointClass::Outside);
    }

    #[test]
    fn golden_square_compiles_to_cube() {
        let m = compile_sequence(&golden_square()).unwrap();
        assert_eq!(m.prisms.len(), 1);
        assert_eq!(m.classify_point([0.0; 3]), PointClass::Inside);
        let bb = m.aabb();
        for a in 0..3 {
            assert!(
                (bb.min[a] + 1.0).abs() < 1e-9 && (bb.max[a] - 1.0).abs() < 1e-9,
                "{bb:?}"
            );
        }
    }

    #[test]
    fn intersect_only_is_boolean_violation() {
        let text = "SKETCH LOOP 0 0 LINE 255 0 LINE 255 255 LINE 0 255 LINE 0 0 ENDLOOP ENDSKETCH \
                    EXTRUDE 0 128 128 128 0 0 0 255 255 255 INT END";
        let e = compile_sequence(&parse_sequence(text).unwrap()).unwrap_err();
        assert_eq!(e.code, DiagnosticCode::BooleanViolation);
        assert_eq!(e.location, Location::Extrude { extrude: 0 });
    }

    #[test]
    fn full_cut_is_empty() {
        let text = "SKETCH LOOP 0 0 LINE 255 0 LINE 255 255 LINE 0 255 LINE 0 0 ENDLOOP ENDSKETCH \
                    EXTRUDE 0 128 128 128 0 0 0 100 100 100 NEW \
                    EXTRUDE 0 128 128 128 0 0 0 255 255 255 CUT END";
        let e = compile_sequence(&parse_sequence(text).unwrap()).unwrap_err();
        assert_eq!(e.code, DiagnosticCode::EmptyResult);
        assert_eq!(e.location, Location::Extrude { extrude: 1 });
    }

    #[test]
    fn thin_plate_is_not_empty() {
        let text = "SKETCH LOOP 0 0 LINE 255 0 LINE 255 255 LINE 0 255 LINE 0 0 ENDLOOP ENDSKETCH \
                    EXTRUDE 0 128 128 128 0 0 0 1 0 255 NEW END";
        assert!(compile_sequence(&parse_sequence(text).unwrap()).is_ok());
    }

    #[test]
    fn normalize_cuboid_at_offset() {
        let m = CompiledModel::from_prisms(
            vec![Prism::cuboid(
                [5.0, -3.0, 7.0],
                [4.0, 2.0, 2.0],
                BooleanOp::NewBody,
            )],
            1e-6,
        )
        .unwrap();
        let (n, sim) = normalize(&m);
        assert!((sim.scale - 0.5).abs() < 1e-12);
        let bb = n.aabb();
        assert!((bb.longest_edge() - 2.0).abs() < 1e-12);
        for c in bb.center() {
            assert!(c.abs() < 1e-12);
        }
        let (_, again) = normalize(&n);
        assert!(again.distance_from_identity() < 1e-12);
    }

    #[test]
    fn normalized_model_is_fixed_point() {
        let m = CompiledModel::from_prisms(vec![cube([0.0; 3], 2.0, BooleanOp::NewBody)], 1e-6)
            .unwrap();
        let (_, sim) = normalize(&m);
        assert!(sim.distance_from_identity() < 1e-12);
    }

    #[test]
    fn kernel_error_maps_to_diagnostic_span() {
        let text =
            "SKETCH LOOP 0 0 LINE 255 0 LINE 255 255 LINE 0 255 LINE 0 10 ENDLOOP ENDSKETCH \
                    EXTRUDE 0 128 128 128 0 0 0 255 255 255 NEW END";
        let (seq, layout) = crate::seq::parse_with_layout(text).unwrap();
        let e = compile_sequence(&seq).unwrap_err();
        assert_eq!(e.code, DiagnosticCode::UnclosedLoop);
        let d = e.to_diagnostic(&layout);
        assert_eq!(d.span, layout.sketches[0].loops[0].span);
    }
}
