//! Sketch-and-extrude sequence model.
//!
//! A [`CadSequence`] is a list of sketches (closed loops of lines, arcs and
//! circles) and a list of extrusions that place a sketch on a plane, sweep it
//! along the plane normal and combine the result with the running solid.
//! Every geometric parameter is an 8-bit [`QuantLevel`].

mod deepcad;
mod diagnostic;
mod grammar;
mod quant;
pub mod random;
mod validate;

pub use deepcad::import_deepcad_json;
pub use diagnostic::{Diagnostic, DiagnosticCode, Location, Span};
pub use grammar::{parse_bytes, parse_sequence, parse_with_layout, print_sequence, Layout};
pub use quant::{dequantize, quantize, quantize_angle, quantize_unit, QuantLevel};
pub use validate::{validate_syntax, validate_with_layout};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Quantized 2D point in sketch coordinates.
pub type QPoint = [QuantLevel; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Curve {
    Line {
        end: QPoint,
    },
    /// Circular arc from the previous point to `end`. The sweep angle is
    /// `2*pi*sweep/255`, counter-clockwise when `ccw` is set.
    Arc {
        end: QPoint,
        sweep: QuantLevel,
        ccw: bool,
    },
    /// Full circle; radius is `radius/255` in sketch units.
    Circle {
        center: QPoint,
        radius: QuantLevel,
    },
}

impl Curve {
    pub fn kind(&self) -> CurveKind {
        match self {
            Curve::Line { .. } => CurveKind::Line,
            Curve::Arc { .. } => CurveKind::Arc,
            Curve::Circle { .. } => CurveKind::Circle,
        }
    }

    /// End point of a chain curve; `None` for circles.
    pub fn end(&self) -> Option<QPoint> {
        match *self {
            Curve::Line { end } | Curve::Arc { end, .. } => Some(end),
            Curve::Circle { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Line,
    Arc,
    Circle,
}

/// A closed loop. For line/arc chains `start` is the first vertex and the last
/// curve must end on it; a circle loop holds exactly one circle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Loop {
    pub start: QPoint,
    pub curves: Vec<Curve>,
}

impl Loop {
    pub fn is_circle(&self) -> bool {
        self.curves
            .iter()
            .any(|c| matches!(c, Curve::Circle { .. }))
    }
}

/// First loop is the outer boundary, the rest are holes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Sketch {
    pub loops: Vec<Loop>,
}

/// Placement of a sketch: translation in `[-1, 1]^3` and Z-Y-X intrinsic Euler
/// angles in `[-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SketchPlane {
    pub origin: [QuantLevel; 3],
    pub orientation: [QuantLevel; 3],
}

impl SketchPlane {
    /// Plane through the quantized origin whose rotation is exactly the
    /// identity (all three angles at -pi compose to the identity).
    pub const fn world_xy() -> Self {
        let mid = QuantLevel::new(128);
        SketchPlane {
            origin: [mid; 3],
            orientation: [QuantLevel::MIN; 3],
        }
    }
}

impl Default for SketchPlane {
    fn default() -> Self {
        Self::world_xy()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BooleanOp {
    NewBody,
    Join,
    Cut,
    Intersect,
}

impl BooleanOp {
    pub const ALL: [BooleanOp; 4] = [
        BooleanOp::NewBody,
        BooleanOp::Join,
        BooleanOp::Cut,
        BooleanOp::Intersect,
    ];

    pub fn token(self) -> &'static str {
        match self {
            BooleanOp::NewBody => "NEW",
            BooleanOp::Join => "JOIN",
            BooleanOp::Cut => "CUT",
            BooleanOp::Intersect => "INT",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        match tok {
            "NEW" => Some(BooleanOp::NewBody),
            "JOIN" => Some(BooleanOp::Join),
            "CUT" => Some(BooleanOp::Cut),
            "INT" => Some(BooleanOp::Intersect),
            _ => None,
        }
    }
}

impl fmt::Display for BooleanOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One extrusion: sketch `sketch_index` placed on `plane`, scaled by
/// `sketch_scale/255` and swept from `-extent_neg/255` to `extent_pos/255`
/// along the plane normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtrudeOp {
    pub sketch_index: usize,
    pub plane: SketchPlane,
    pub extent_pos: QuantLevel,
    pub extent_neg: QuantLevel,
    pub sketch_scale: QuantLevel,
    pub boolean: BooleanOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CadSequence {
    pub sketches: Vec<Sketch>,
    pub extrudes: Vec<ExtrudeOp>,
    /// Whether the `END` token is present.
    pub terminated: bool,
}

impl CadSequence {
    /// Canonical text, see [`print_sequence`].
    pub fn to_text(&self) -> String {
        print_sequence(self)
    }

    /// Iterates `(sketch, loop, curve)` indices with the curve and the point it starts from.
    pub fn curves(&self) -> impl Iterator<Item = CurveRef<'_>> + '_ {
        self.sketches.iter().enumerate().flat_map(|(si, sk)| {
            sk.loops.iter().enumerate().flat_map(move |(li, lp)| {
                let mut prev = lp.start;
                lp.curves.iter().enumerate().map(move |(ci, c)| {
                    let from = prev;
                    if let Some(end) = c.end() {
                        prev = end;
                    }
                    CurveRef {
                        sketch: si,
                        loop_index: li,
                        curve_index: ci,
                        from,
                        curve: c,
                    }
                })
            })
        })
    }
}

/// A curve together with its position and implicit start point.
#[derive(Debug, Clone, Copy)]
pub struct CurveRef<'a> {
    pub sketch: usize,
    pub loop_index: usize,
    pub curve_index: usize,
    pub from: QPoint,
    pub curve: &'a Curve,
}

/// Canonical text of a one-sketch sequence: the square `[-1, 1]^2` extruded
/// symmetrically by 1 on the identity plane.
pub const GOLDEN_SQUARE: &str = include_str!("../../fixtures/square.cad");

/// The in-memory form of [`GOLDEN_SQUARE`].
pub fn golden_square() -> CadSequence {
    let q = QuantLevel::new;
    let sq = Loop {
        start: [q(0), q(0)],
        curves: vec![
            Curve::Line {
                end: [q(255), q(0)],
            },
            Curve::Line {
                end: [q(255), q(255)],
            },
            Curve::Line {
                end: [q(0), q(255)],
            },
            Curve::Line { end: [q(0), q(0)] },
        ],
    };
    CadSequence {
        sketches: vec![Sketch { loops: vec![sq] }],
        extrudes: vec![ExtrudeOp {
            sketch_index: 0,
            plane: SketchPlane::world_xy(),
            extent_pos: q(255),
            extent_neg: q(255),
            sketch_scale: q(255),
            boolean: BooleanOp::NewBody,
        }],
        terminated: true,
    }
}
