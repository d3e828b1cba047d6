//! Structural checks that need no geometry.

use super::{BooleanOp, CadSequence, Curve, Diagnostic, DiagnosticCode, Layout, Location, Span};

/// Structural diagnostics for `seq`, spans taken from its canonical layout.
/// Empty iff the sequence is structurally valid; geometric closure and areas
/// are checked by the kernel.
pub fn validate_syntax(seq: &CadSequence) -> Vec<Diagnostic> {
    validate_with_layout(seq, &Layout::canonical(seq))
}

/// Like [`validate_syntax`] with spans taken from a parsed layout.
pub fn validate_with_layout(seq: &CadSequence, layout: &Layout) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |code, loc: Location, span: Option<Span>, msg: String| {
        let span = span.unwrap_or_else(|| layout.span_of(loc));
        out.push(Diagnostic::new(code, span, msg).with_location(loc));
    };

    for (si, sk) in seq.sketches.iter().enumerate() {
        if sk.loops.is_empty() {
            push(
                DiagnosticCode::ZeroAreaProfile,
                Location::Sketch { sketch: si },
                None,
                "sketch has no loops".into(),
            );
        }
        for (li, lp) in sk.loops.iter().enumerate() {
            let loc = Location::Loop {
                sketch: si,
                loop_index: li,
            };
            if lp.is_circle() {
                if lp.curves.len() != 1 {
                    push(
                        DiagnosticCode::UnknownToken,
                        loc,
                        None,
                        "a circle loop must contain exactly one curve".into(),
                    );
                }
                for (ci, c) in lp.curves.iter().enumerate() {
                    if let Curve::Circle { radius, .. } = c {
                        if radius.get() == 0 {
                            let cl = Location::Curve {
                                sketch: si,
                                loop_index: li,
                                curve: ci,
                            };
                            push(
                                DiagnosticCode::ZeroAreaProfile,
                                cl,
                                None,
                                "circle has zero radius".into(),
                            );
                        }
                    }
                }
                continue;
            }
            let arcs = lp
                .curves
                .iter()
                .filter(|c| matches!(c, Curve::Arc { .. }))
                .count();
            let n = lp.curves.len();
            if !(n >= 3 || (arcs >= 1 && n >= 2)) {
                push(
                    DiagnosticCode::ZeroAreaProfile,
                    loc,
                    None,
                    format!("loop with {n} curve(s) cannot enclose an area (need 3 curves, or 2 including an arc)"),
                );
            }
            for (ci, c) in lp.curves.iter().enumerate() {
                if let Curve::Arc { sweep, .. } = c {
                    if sweep.get() == 0 || sweep.get() == 255 {
                        let cl = Location::Curve {
                            sketch: si,
                            loop_index: li,
                            curve: ci,
                        };
                        push(
                            DiagnosticCode::OutOfRangeParam,
                            cl,
                            None,
                            format!("arc sweep level {sweep} must lie in 1..=254"),
                        );
                    }
                }
            }
        }
    }

    for (ei, ex) in seq.extrudes.iter().enumerate() {
        let loc = Location::Extrude { extrude: ei };
        let span = layout.span_of(loc);
        if ex.sketch_index >= seq.sketches.len() {
            push(
                DiagnosticCode::BadReference,
                loc,
                Some(Span::at(span.start + 1)),
                format!(
                    "extrude references sketch {} but only {} exist",
                    ex.sketch_index,
                    seq.sketches.len()
                ),
            );
        }
        if ex.extent_pos.get() == 0 && ex.extent_neg.get() == 0 {
            push(
                DiagnosticCode::InvalidExtrusion,
                loc,
                None,
                "both extents are zero".into(),
            );
        }
        if ex.sketch_scale.get() == 0 {
            push(
                DiagnosticCode::InvalidExtrusion,
                loc,
                None,
                "sketch scale is zero".into(),
            );
        }
        if ei == 0 && ex.boolean != BooleanOp::NewBody {
            push(
                DiagnosticCode::BooleanViolation,
                loc,
                None,
                format!(
                    "first extrusion must create a new body, found {}",
                    ex.boolean
                ),
            );
        }
    }

    if !seq.terminated {
        push(
            DiagnosticCode::MissingEndToken,
            Location::Sequence,
            Some(layout.end),
            "sequence is not terminated by END".into(),
        );
    }
    out.sort_by_key(|d| (d.span.start, d.span.end));
    out
}
