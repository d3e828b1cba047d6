//! Ingestion of DeepCAD-style construction-sequence JSON.
//!
//! Only sketches of line, arc and circle curves and extrude features are
//! understood. All geometry is rescaled by one global factor so that every
//! coordinate, origin and extent fits the quantization range, then each
//! profile is normalised to `[-1, 1]` with its own sketch scale. The accepted
//! layout is documented in `docs/deepcad_json.md`.

use super::{
    quantize, quantize_angle, quantize_unit, validate_syntax, BooleanOp, CadSequence, Curve,
    Diagnostic, DiagnosticCode, ExtrudeOp, Loop, QuantLevel, Sketch, SketchPlane, Span,
};
use crate::geom::frame::{euler_zyx_from_matrix, Mat3};
use serde_json::Value;
use std::f64::consts::PI;

const CHAIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
enum RawCurve {
    Line {
        start: [f64; 2],
        end: [f64; 2],
    },
    Arc {
        start: [f64; 2],
        end: [f64; 2],
        center: [f64; 2],
        sweep: f64,
        ccw: bool,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
    },
}

impl RawCurve {
    fn endpoints(&self) -> Option<([f64; 2], [f64; 2])> {
        match *self {
            RawCurve::Line { start, end } | RawCurve::Arc { start, end, .. } => Some((start, end)),
            RawCurve::Circle { .. } => None,
        }
    }

    fn reversed(&self) -> RawCurve {
        match *self {
            RawCurve::Line { start, end } => RawCurve::Line {
                start: end,
                end: start,
            },
            RawCurve::Arc {
                start,
                end,
                center,
                sweep,
                ccw,
            } => RawCurve::Arc {
                start: end,
                end: start,
                center,
                sweep,
                ccw: !ccw,
            },
            RawCurve::Circle { .. } => self.clone(),
        }
    }

    fn extent(&self) -> f64 {
        match *self {
            RawCurve::Line { start, end } => start
                .iter()
                .chain(end.iter())
                .fold(0.0f64, |m, v| m.max(v.abs())),
            RawCurve::Arc {
                start,
                center,
                sweep,
                ccw,
                ..
            } => {
                // The bulge of an arc can reach past both endpoints.
                let r = (start[0] - center[0]).hypot(start[1] - center[1]);
                let a0 = (start[1] - center[1]).atan2(start[0] - center[0]);
                let dir = if ccw { 1.0 } else { -1.0 };
                (0..=64)
                    .map(|k| a0 + dir * sweep * k as f64 / 64.0)
                    .map(|a| {
                        (center[0] + r * a.cos())
                            .abs()
                            .max((center[1] + r * a.sin()).abs())
                    })
                    .fold(0.0f64, f64::max)
            }
            RawCurve::Circle { center, radius } => center[0].abs().max(center[1].abs()) + radius,
        }
    }
}

struct RawProfile {
    loops: Vec<Vec<RawCurve>>,
}

struct RawExtrude {
    profile: RawProfile,
    origin: [f64; 3],
    angles: [f64; 3],
    extent_pos: f64,
    extent_neg: f64,
    boolean: BooleanOp,
}

struct Ctx {
    diags: Vec<Diagnostic>,
    item: usize,
}

impl Ctx {
    fn err(&mut self, code: DiagnosticCode, msg: impl Into<String>) {
        self.diags
            .push(Diagnostic::new(code, Span::at(self.item), msg));
    }
}

/// Converts a DeepCAD-style JSON document into a sequence.
///
/// Unsupported features produce `UnknownToken` diagnostics naming the feature
/// type; non-finite numbers produce `OutOfRangeParam`. Diagnostic spans index
/// the entries of the document's `sequence` array.
pub fn import_deepcad_json(doc: &Value) -> Result<CadSequence, Vec<Diagnostic>> {
    let mut ctx = Ctx {
        diags: Vec::new(),
        item: 0,
    };
    let entities = doc.get("entities").and_then(Value::as_object);
    let sequence = doc.get("sequence").and_then(Value::as_array);
    let (Some(entities), Some(sequence)) = (entities, sequence) else {
        ctx.err(
            DiagnosticCode::EmptyResult,
            "document has no `entities` map and `sequence` list",
        );
        return Err(ctx.diags);
    };

    let mut raw = Vec::new();
    for (i, item) in sequence.iter().enumerate() {
        ctx.item = i;
        let Some(id) = item.get("entity").and_then(Value::as_str) else {
            ctx.err(
                DiagnosticCode::UnknownToken,
                format!("sequence entry {i} has no `entity` id"),
            );
            continue;
        };
        let Some(ent) = entities.get(id) else {
            ctx.err(
                DiagnosticCode::UnknownToken,
                format!("sequence entry {i} references unknown entity `{id}`"),
            );
            continue;
        };
        let kind = ent
            .get("type")
            .or_else(|| item.get("type"))
            .and_then(Value::as_str)
            .unwrap_or("<missing>");
        match kind {
            "Sketch" => {}
            "ExtrudeFeature" => raw.extend(read_extrude(&mut ctx, ent, entities)),
            other => ctx.err(
                DiagnosticCode::UnknownToken,
                format!("unsupported feature `{other}`"),
            ),
        }
    }
    if ctx.diags.is_empty() && raw.is_empty() {
        ctx.item = 0;
        ctx.err(
            DiagnosticCode::EmptyResult,
            "document contains no extrude features",
        );
    }
    if !ctx.diags.is_empty() {
        return Err(ctx.diags);
    }

    let global = raw
        .iter()
        .flat_map(|r| {
            let prof = r.profile.loops.iter().flatten().map(RawCurve::extent);
            prof.chain(r.origin.iter().map(|v| v.abs()))
                .chain([r.extent_pos, r.extent_neg])
        })
        .fold(0.0f64, f64::max);
    if !(global.is_finite() && global > 0.0) {
        ctx.err(
            DiagnosticCode::OutOfRangeParam,
            "geometry has no finite non-zero extent",
        );
        return Err(ctx.diags);
    }
    let g = 1.0 / global;

    let mut seq = CadSequence {
        terminated: true,
        ..Default::default()
    };
    for r in raw {
        let local = r
            .profile
            .loops
            .iter()
            .flatten()
            .map(RawCurve::extent)
            .fold(0.0f64, f64::max)
            * g;
        let scale = if local > 0.0 { local } else { 1.0 };
        let f = g / scale;
        let qp = |p: [f64; 2]| [quantize(p[0] * f), quantize(p[1] * f)];
        let loops = r
            .profile
            .loops
            .iter()
            .map(|curves| {
                let start = match curves.first() {
                    Some(RawCurve::Circle { center, .. }) => qp(*center),
                    Some(c) => qp(c.endpoints().map(|e| e.0).unwrap_or_default()),
                    None => [QuantLevel::new(128); 2],
                };
                let curves = curves
                    .iter()
                    .map(|c| match *c {
                        RawCurve::Line { end, .. } => Curve::Line { end: qp(end) },
                        RawCurve::Arc {
                            end, sweep, ccw, ..
                        } => {
                            let level =
                                (sweep / (2.0 * PI) * 255.0).round().clamp(1.0, 254.0) as u8;
                            Curve::Arc {
                                end: qp(end),
                                sweep: QuantLevel::new(level),
                                ccw,
                            }
                        }
                        RawCurve::Circle { center, radius } => Curve::Circle {
                            center: qp(center),
                            radius: quantize_unit(radius * f),
                        },
                    })
                    .collect();
                Loop { start, curves }
            })
            .collect();
        let sketch_index = seq.sketches.len();
        seq.sketches.push(Sketch { loops });
        seq.extrudes.push(ExtrudeOp {
            sketch_index,
            plane: SketchPlane {
                origin: [
                    quantize(r.origin[0] * g),
                    quantize(r.origin[1] * g),
                    quantize(r.origin[2] * g),
                ],
                orientation: best_angle_levels(r.angles),
            },
            extent_pos: quantize_unit(r.extent_pos * g),
            extent_neg: quantize_unit(r.extent_neg * g),
            sketch_scale: quantize_unit(scale),
            boolean: r.boolean,
        });
    }
    let diags = validate_syntax(&seq);
    if diags.is_empty() {
        Ok(seq)
    } else {
        Err(diags)
    }
}

/// Among the equivalent Z-Y-X triples `(a, b, c)` and `(a+pi, pi-b, c+pi)`,
/// picks the one that quantizes with the smallest angular error.
fn best_angle_levels(angles: [f64; 3]) -> [QuantLevel; 3] {
    let [a, b, c] = angles;
    let candidates = [[a, b, c], [a + PI, PI - b, c + PI]];
    let err = |t: &[f64; 3]| -> f64 {
        t.iter()
            .map(|&x| {
                let q = quantize_angle(x).angle();
                let d = super::quant::wrap_angle(x - q);
                d.abs()
            })
            .sum()
    };
    let best = candidates
        .iter()
        .min_by(|x, y| {
            err(x)
                .partial_cmp(&err(y))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .copied()
        .unwrap_or(angles);
    [
        quantize_angle(best[0]),
        quantize_angle(best[1]),
        quantize_angle(best[2]),
    ]
}

fn num(ctx: &mut Ctx, v: Option<&Value>, what: &str) -> Option<f64> {
    match v.and_then(Value::as_f64) {
        Some(x) if x.is_finite() => Some(x),
        Some(_) => {
            ctx.err(
                DiagnosticCode::OutOfRangeParam,
                format!("{what} is not finite"),
            );
            None
        }
        None => {
            ctx.err(
                DiagnosticCode::UnknownToken,
                format!("missing numeric field {what}"),
            );
            None
        }
    }
}

fn vec3(ctx: &mut Ctx, v: Option<&Value>, what: &str) -> Option<[f64; 3]> {
    let v = v?;
    let x = num(ctx, v.get("x"), &format!("{what}.x"))?;
    let y = num(ctx, v.get("y"), &format!("{what}.y"))?;
    let z = v.get("z").and_then(Value::as_f64).unwrap_or(0.0);
    Some([x, y, z])
}

fn pt2(ctx: &mut Ctx, v: Option<&Value>, what: &str) -> Option<[f64; 2]> {
    if v.is_none() {
        ctx.err(
            DiagnosticCode::UnknownToken,
            format!("missing point {what}"),
        );
        return None;
    }
    vec3(ctx, v, what).map(|p| [p[0], p[1]])
}

fn read_extrude(
    ctx: &mut Ctx,
    ent: &Value,
    entities: &serde_json::Map<String, Value>,
) -> Vec<RawExtrude> {
    let op = ent
        .get("operation")
        .and_then(Value::as_str)
        .unwrap_or("NewBodyFeatureOperation");
    let boolean = if op.contains("NewBody") {
        BooleanOp::NewBody
    } else if op.contains("Join") {
        BooleanOp::Join
    } else if op.contains("Cut") {
        BooleanOp::Cut
    } else if op.contains("Intersect") {
        BooleanOp::Intersect
    } else {
        ctx.err(
            DiagnosticCode::UnknownToken,
            format!("unsupported extrude operation `{op}`"),
        );
        return Vec::new();
    };
    let one = num(
        ctx,
        ent.pointer("/extent_one/distance/value"),
        "extent_one.distance.value",
    );
    let Some(one) = one else { return Vec::new() };
    let kind = ent
        .get("extent_type")
        .and_then(Value::as_str)
        .unwrap_or("OneSideFeatureExtentType");
    let (pos, neg) = if kind.contains("Symmetric") {
        (one.abs(), one.abs())
    } else if kind.contains("TwoSides") {
        let Some(two) = num(
            ctx,
            ent.pointer("/extent_two/distance/value"),
            "extent_two.distance.value",
        ) else {
            return Vec::new();
        };
        (one, two)
    } else if kind.contains("OneSide") {
        if one >= 0.0 {
            (one, 0.0)
        } else {
            (0.0, -one)
        }
    } else {
        ctx.err(
            DiagnosticCode::UnknownToken,
            format!("unsupported extent type `{kind}`"),
        );
        return Vec::new();
    };

    let Some(profiles) = ent.get("profiles").and_then(Value::as_array) else {
        ctx.err(
            DiagnosticCode::UnknownToken,
            "extrude feature has no `profiles` list",
        );
        return Vec::new();
    };
    let mut out = Vec::new();
    for pr in profiles {
        let sketch_id = pr.get("sketch").and_then(Value::as_str).unwrap_or("");
        let profile_id = pr.get("profile").and_then(Value::as_str).unwrap_or("");
        let Some(sketch) = entities.get(sketch_id) else {
            ctx.err(
                DiagnosticCode::UnknownToken,
                format!("extrude references unknown sketch `{sketch_id}`"),
            );
            continue;
        };
        let Some(profile) = sketch.get("profiles").and_then(|p| p.get(profile_id)) else {
            ctx.err(
                DiagnosticCode::UnknownToken,
                format!("sketch `{sketch_id}` has no profile `{profile_id}`"),
            );
            continue;
        };
        let Some((origin, angles)) = read_transform(ctx, sketch.get("transform")) else {
            continue;
        };
        let Some(profile) = read_profile(ctx, profile) else {
            continue;
        };
        out.push(RawExtrude {
            profile,
            origin,
            angles,
            extent_pos: pos,
            extent_neg: neg,
            boolean,
        });
    }
    out
}

fn read_transform(ctx: &mut Ctx, t: Option<&Value>) -> Option<([f64; 3], [f64; 3])> {
    let Some(t) = t else {
        return Some(([0.0; 3], [0.0; 3]));
    };
    let origin = match t.get("origin") {
        Some(o) => vec3(ctx, Some(o), "transform.origin")?,
        None => [0.0; 3],
    };
    let axis = |ctx: &mut Ctx, key: &str, default: [f64; 3]| match t.get(key) {
        Some(v) => vec3(ctx, Some(v), &format!("transform.{key}")),
        None => Some(default),
    };
    let x = axis(ctx, "x_axis", [1.0, 0.0, 0.0])?;
    let y = axis(ctx, "y_axis", [0.0, 1.0, 0.0])?;
    let z = axis(ctx, "z_axis", [0.0, 0.0, 1.0])?;
    let m: Mat3 = [[x[0], y[0], z[0]], [x[1], y[1], z[1]], [x[2], y[2], z[2]]];
    Some((origin, euler_zyx_from_matrix(&m)))
}

fn read_profile(ctx: &mut Ctx, profile: &Value) -> Option<RawProfile> {
    let Some(loops) = profile.get("loops").and_then(Value::as_array) else {
        ctx.err(DiagnosticCode::UnknownToken, "profile has no `loops` list");
        return None;
    };
    let mut outer = Vec::new();
    let mut inner = Vec::new();
    for lp in loops {
        let Some(curves) = lp.get("profile_curves").and_then(Value::as_array) else {
            ctx.err(
                DiagnosticCode::UnknownToken,
                "loop has no `profile_curves` list",
            );
            return None;
        };
        let mut raw = Vec::with_capacity(curves.len());
        for c in curves {
            raw.push(read_curve(ctx, c)?);
        }
        let chained = chain(raw);
        if lp.get("is_outer").and_then(Value::as_bool).unwrap_or(false) {
            outer.push(chained);
        } else {
            inner.push(chained);
        }
    }
    outer.extend(inner);
    Some(RawProfile { loops: outer })
}

fn read_curve(ctx: &mut Ctx, c: &Value) -> Option<RawCurve> {
    let kind = c.get("type").and_then(Value::as_str).unwrap_or("<missing>");
    match kind {
        "Line3D" => Some(RawCurve::Line {
            start: pt2(ctx, c.get("start_point"), "start_point")?,
            end: pt2(ctx, c.get("end_point"), "end_point")?,
        }),
        "Arc3D" => {
            let start = pt2(ctx, c.get("start_point"), "start_point")?;
            let end = pt2(ctx, c.get("end_point"), "end_point")?;
            let center = pt2(ctx, c.get("center_point"), "center_point")?;
            let ccw = c
                .pointer("/normal/z")
                .and_then(Value::as_f64)
                .unwrap_or(1.0)
                >= 0.0;
            let a0 = (start[1] - center[1]).atan2(start[0] - center[0]);
            let a1 = (end[1] - center[1]).atan2(end[0] - center[0]);
            let mut ccw_sweep = (a1 - a0).rem_euclid(2.0 * PI);
            if ccw_sweep == 0.0 {
                ccw_sweep = 2.0 * PI;
            }
            let sweep = if ccw { ccw_sweep } else { 2.0 * PI - ccw_sweep };
            Some(RawCurve::Arc {
                start,
                end,
                center,
                sweep,
                ccw,
            })
        }
        "Circle3D" => Some(RawCurve::Circle {
            center: pt2(ctx, c.get("center_point"), "center_point")?,
            radius: num(ctx, c.get("radius"), "radius")?,
        }),
        other => {
            ctx.err(
                DiagnosticCode::UnknownToken,
                format!("unsupported curve type `{other}`"),
            );
            None
        }
    }
}

fn close(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).abs() <= CHAIN_TOL && (a[1] - b[1]).abs() <= CHAIN_TOL
}

/// Orients curves head-to-tail; curves that do not connect are left as they are.
fn chain(mut curves: Vec<RawCurve>) -> Vec<RawCurve> {
    if curves.len() < 2 {
        return curves;
    }
    if let (Some((s0, e0)), Some((s1, e1))) = (curves[0].endpoints(), curves[1].endpoints()) {
        if !(close(e0, s1) || close(e0, e1)) && (close(s0, s1) || close(s0, e1)) {
            curves[0] = curves[0].reversed();
        }
    }
    for i in 1..curves.len() {
        let Some((_, prev_end)) = curves[i - 1].endpoints() else {
            continue;
        };
        if let Some((s, e)) = curves[i].endpoints() {
            if !close(s, prev_end) && close(e, prev_end) {
                curves[i] = curves[i].reversed();
            }
        }
    }
    curves
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::CurveKind;
    use serde_json::json;

    fn rect_doc(op: &str) -> Value {
        let l = |x0: f64, y0: f64, x1: f64, y1: f64| json!({"type": "Line3D", "start_point": {"x": x0, "y": y0, "z": 0.0}, "end_point": {"x": x1, "y": y1, "z": 0.0}});
        json!({
            "entities": {
                "S1": {
                    "type": "Sketch",
                    "transform": {
                        "origin": {"x": 0.0, "y": 0.0, "z": 0.0},
                        "x_axis": {"x": 1.0, "y": 0.0, "z": 0.0},
                        "y_axis": {"x": 0.0, "y": 1.0, "z": 0.0},
                        "z_axis": {"x": 0.0, "y": 0.0, "z": 1.0}
                    },
                    "profiles": {"P1": {"loops": [{"is_outer": true, "profile_curves": [
                        l(-0.5, -0.25, 0.5, -0.25), l(0.5, 0.25, 0.5, -0.25), l(0.5, 0.25, -0.5, 0.25), l(-0.5, 0.25, -0.5, -0.25)
                    ]}]}}
                },
                "E1": {
                    "type": "ExtrudeFeature",
                    "profiles": [{"profile": "P1", "sketch": "S1"}],
                    "extent_type": "OneSideFeatureExtentType",
                    "extent_one": {"distance": {"value": 0.2}},
                    "operation": op
                }
            },
            "sequence": [{"index": 0, "type": "Sketch", "entity": "S1"}, {"index": 1, "type": "ExtrudeFeature", "entity": "E1"}]
        })
    }

    #[test]
    fn rectangle_extrusion() {
        let seq = import_deepcad_json(&rect_doc("NewBodyFeatureOperation")).unwrap();
        assert_eq!(seq.sketches.len(), 1);
        assert_eq!(seq.extrudes.len(), 1);
        let lp = &seq.sketches[0].loops[0];
        assert_eq!(lp.curves.len(), 4);
        assert!(lp.curves.iter().all(|c| c.kind() == CurveKind::Line));
        assert_eq!(lp.curves.last().unwrap().end(), Some(lp.start));
        let ex = &seq.extrudes[0];
        assert_eq!(ex.boolean, BooleanOp::NewBody);
        // global factor 1/0.5 => profile extent 1 => scale 1; extent 0.2 * 2 = 0.4
        assert_eq!(ex.sketch_scale.get(), 255);
        assert!((ex.extent_pos.unit() - 0.4).abs() <= 0.5 / 255.0);
        assert_eq!(ex.extent_neg.get(), 0);
        // identity frame picks the exactly representable (pi, pi, pi) triple
        assert!(ex
            .plane
            .orientation
            .iter()
            .all(|q| q.get() == 0 || q.get() == 255));
        // dequantized corner matches the source within one step
        assert!((lp.start[0].signed() - (-1.0)).abs() <= 1.0 / 255.0);
        assert!((lp.start[1].signed() - (-0.5)).abs() <= 1.0 / 255.0);
    }

    #[test]
    fn unsupported_feature_is_named() {
        let mut doc = rect_doc("NewBodyFeatureOperation");
        doc["entities"]["F1"] = json!({"type": "fillet", "radius": 0.1});
        doc["sequence"]
            .as_array_mut()
            .unwrap()
            .push(json!({"index": 2, "type": "fillet", "entity": "F1"}));
        let d = import_deepcad_json(&doc).unwrap_err();
        assert!(d
            .iter()
            .any(|d| d.code == DiagnosticCode::UnknownToken && d.message.contains("fillet")));
        assert_eq!(d[0].span, Span::at(2));
    }

    #[test]
    fn empty_document() {
        assert!(!import_deepcad_json(&json!({})).unwrap_err().is_empty());
        assert!(
            !import_deepcad_json(&json!({"entities": {}, "sequence": []}))
                .unwrap_err()
                .is_empty()
        );
    }

    #[test]
    fn non_finite_values() {
        let mut doc = rect_doc("NewBodyFeatureOperation");
        doc["entities"]["E1"]["extent_one"]["distance"]["value"] = json!("x");
        let d = import_deepcad_json(&doc).unwrap_err();
        assert_eq!(d[0].code, DiagnosticCode::UnknownToken);
    }

    #[test]
    fn first_cut_is_rejected() {
        let d = import_deepcad_json(&rect_doc("CutFeatureOperation")).unwrap_err();
        assert_eq!(d[0].code, DiagnosticCode::BooleanViolation);
    }
}
