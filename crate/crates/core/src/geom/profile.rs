//! Turning sketch loops into polygonal regions.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::polygon::{self, P2};
use super::{KernelConfig, KernelError};
use crate::seq::{Curve, DiagnosticCode, Location, Sketch};

/// A curve in real sketch coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RealCurve {
    Line {
        end: P2,
    },
    /// Arc from the previous point to `end` sweeping `sweep` radians.
    Arc {
        end: P2,
        sweep: f64,
        ccw: bool,
    },
    Circle {
        center: P2,
        radius: f64,
    },
}

/// A closed loop in real sketch coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLoop {
    pub start: P2,
    pub curves: Vec<RealCurve>,
}

impl RealLoop {
    pub fn polygon(points: &[P2]) -> Self {
        let mut curves: Vec<RealCurve> = points[1..]
            .iter()
            .map(|&end| RealCurve::Line { end })
            .collect();
        curves.push(RealCurve::Line { end: points[0] });
        RealLoop {
            start: points[0],
            curves,
        }
    }

    pub fn circle(center: P2, radius: f64) -> Self {
        RealLoop {
            start: center,
            curves: vec![RealCurve::Circle { center, radius }],
        }
    }
}

/// Planar region: a counter-clockwise outer polygon and clockwise holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub outer: Vec<P2>,
    pub holes: Vec<Vec<P2>>,
}

impl Region {
    pub fn area(&self) -> f64 {
        polygon::signed_area(&self.outer)
            + self
                .holes
                .iter()
                .map(|h| polygon::signed_area(h))
                .sum::<f64>()
    }

    pub fn loops(&self) -> impl Iterator<Item = &Vec<P2>> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn contains(&self, p: P2) -> bool {
        polygon::contains(&self.outer, p) && !self.holes.iter().any(|h| polygon::contains(h, p))
    }

    /// Signed distance to the region boundary, negative inside.
    pub fn signed_distance(&self, p: P2) -> f64 {
        let d2 = self
            .loops()
            .map(|l| polygon::boundary_dist2(l, p))
            .fold(f64::INFINITY, f64::min);
        let d = d2.sqrt();
        if self.contains(p) {
            -d
        } else {
            d
        }
    }

    pub fn bounds(&self) -> (P2, P2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.outer {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn map(&self, f: impl Fn(P2) -> P2) -> Region {
        Region {
            outer: self.outer.iter().map(|&p| f(p)).collect(),
            holes: self
                .holes
                .iter()
                .map(|h| h.iter().map(|&p| f(p)).collect())
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Region {
        self.map(|p| [p[0] * s, p[1] * s])
    }

    /// Counter-clockwise triangles covering the region.
    pub fn triangulate(&self) -> Vec<[P2; 3]> {
        polygon::triangulate(&self.outer, &self.holes)
    }

    /// Region from real-coordinate loops with the given tolerances.
    pub fn from_loops(loops: &[RealLoop], cfg: &KernelConfig) -> Result<Region, KernelError> {
        build_region(loops, 0, cfg)
    }
}

fn arc_points(from: P2, end: P2, sweep: f64, ccw: bool, arc_segments: usize, out: &mut Vec<P2>) {
    let dx = end[0] - from[0];
    let dy = end[1] - from[1];
    let chord = dx.hypot(dy);
    if chord == 0.0 || sweep <= 0.0 || sweep >= TAU {
        out.push(end);
        return;
    }
    let half = sweep / 2.0;
    let offset = (chord / 2.0) / half.tan();
    let side = if ccw { 1.0 } else { -1.0 };
    let normal = [-dy / chord, dx / chord];
    let center = [
        (from[0] + end[0]) / 2.0 + side * offset * normal[0],
        (from[1] + end[1]) / 2.0 + side * offset * normal[1],
    ];
    let radius = chord / (2.0 * half.sin());
    let phi0 = (from[1] - center[1]).atan2(from[0] - center[0]);
    let segments = ((arc_segments as f64 * sweep / TAU).ceil() as usize).max(1);
    for k in 1..segments {
        let phi = phi0 + side * sweep * k as f64 / segments as f64;
        out.push([
            center[0] + radius * phi.cos(),
            center[1] + radius * phi.sin(),
        ]);
    }
    out.push(end);
}

fn circle_points(center: P2, radius: f64, arc_segments: usize) -> Vec<P2> {
    (0..arc_segments)
        .map(|k| {
            let t = TAU * k as f64 / arc_segments as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

/// Polygon vertices of a loop without the repeated closing vertex, plus the
/// gap between the chain's last endpoint and its start.
pub fn polygonize(lp: &RealLoop, arc_segments: usize) -> (Vec<P2>, f64) {
    if let [RealCurve::Circle { center, radius }] = lp.curves.as_slice() {
        return (circle_points(*center, *radius, arc_segments), 0.0);
    }
    let mut pts = vec![lp.start];
    let mut prev = lp.start;
    for c in &lp.curves {
        match *c {
            RealCurve::Line { end } => {
                pts.push(end);
                prev = end;
            }
            RealCurve::Arc { end, sweep, ccw } => {
                arc_points(prev, end, sweep, ccw, arc_segments, &mut pts);
                prev = end;
            }
            RealCurve::Circle { center, radius } => {
                pts.extend(circle_points(center, radius, arc_segments));
            }
        }
    }
    let last = pts.pop().unwrap_or(lp.start);
    let gap = (last[0] - lp.start[0]).hypot(last[1] - lp.start[1]);
    if pts.is_empty() {
        pts.push(lp.start);
    }
    pts.dedup();
    (pts, gap)
}

fn real_loop(lp: &crate::seq::Loop) -> RealLoop {
    let pt = |q: crate::seq::QPoint| [q[0].signed(), q[1].signed()];
    RealLoop {
        start: pt(lp.start),
        curves: lp
            .curves
            .iter()
            .map(|c| match *c {
                Curve::Line { end } => RealCurve::Line { end: pt(end) },
                Curve::Arc { end, sweep, ccw } => RealCurve::Arc {
                    end: pt(end),
                    sweep: TAU * sweep.get() as f64 / 255.0,
                    ccw,
                },
                Curve::Circle { center, radius } => RealCurve::Circle {
                    center: pt(center),
                    radius: radius.unit(),
                },
            })
            .collect(),
    }
}

/// Polygonizes a sketch at unit scale, checking closure, area and nesting.
pub fn build_profile(sketch: &Sketch, arc_segments: usize) -> Result<Region, KernelError> {
    let cfg = KernelConfig {
        arc_segments,
        ..KernelConfig::default()
    };
    build_sketch_region(sketch, 0, &cfg)
}

pub(crate) fn build_sketch_region(
    sketch: &Sketch,
    index: usize,
    cfg: &KernelConfig,
) -> Result<Region, KernelError> {
    let loops: Vec<RealLoop> = sketch.loops.iter().map(real_loop).collect();
    build_region(&loops, index, cfg)
}

fn build_region(
    loops: &[RealLoop],
    sketch: usize,
    cfg: &KernelConfig,
) -> Result<Region, KernelError> {
    let zero_area = |loop_index: usize, detail: String| {
        KernelError::new(
            DiagnosticCode::ZeroAreaProfile,
            detail,
            Location::Loop { sketch, loop_index },
        )
    };
    if loops.is_empty() {
        return Err(KernelError::new(
            DiagnosticCode::ZeroAreaProfile,
            "sketch has no loops",
            Location::Sketch { sketch },
        ));
    }
    let mut polys = Vec::with_capacity(loops.len());
    for (li, lp) in loops.iter().enumerate() {
        let (mut pts, gap) = polygonize(lp, cfg.arc_segments);
        if gap > cfg.closure_epsilon {
            return Err(KernelError::new(
                DiagnosticCode::UnclosedLoop,
                format!(
                    "loop ends {gap:.4} away from its start (tolerance {:.4})",
                    cfg.closure_epsilon
                ),
                Location::Loop {
                    sketch,
                    loop_index: li,
                },
            ));
        }
        let area = polygon::signed_area(&pts);
        if pts.len() < 3 || area.abs() < cfg.area_epsilon {
            return Err(zero_area(
                li,
                format!("loop encloses area {:.3e}", area.abs()),
            ));
        }
        if !polygon::is_simple(&pts) {
            return Err(zero_area(li, "loop intersects itself".into()));
        }
        if area < 0.0 {
            pts.reverse();
        }
        polys.push((li, area.abs(), pts));
    }
    let outer_pos = (0..polys.len())
        .max_by(|&a, &b| polys[a].1.total_cmp(&polys[b].1))
        .unwrap_or(0);
    let (_, _, outer) = polys.swap_remove(outer_pos);
    polys.sort_by_key(|p| p.0);
    let mut holes: Vec<Vec<P2>> = Vec::with_capacity(polys.len());
    for (k, (li, _, mut h)) in polys.iter().cloned().enumerate() {
        if !polygon::boundaries_disjoint(&outer, &h)
            || !h.iter().all(|&p| polygon::contains(&outer, p))
        {
            return Err(zero_area(
                li,
                "hole is not strictly inside the outer loop".into(),
            ));
        }
        for (lj, _, other) in &polys[..k] {
            if !polygon::boundaries_disjoint(other, &h)
                || polygon::contains(other, h[0])
                || polygon::contains(&h, other[0])
            {
                return Err(zero_area(li, format!("hole overlaps loop {lj}")));
            }
        }
        h.reverse();
        holes.push(h);
    }
    Ok(Region { outer, holes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::{parse_sequence, QuantLevel};
    use std::f64::consts::PI;

    fn cfg() -> KernelConfig {
        KernelConfig::default()
    }

    #[test]
    fn unit_square_region_area() {
        let sq = RealLoop::polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let r = Region::from_loops(&[sq], &cfg()).unwrap();
        assert_eq!(r.outer.len(), 4);
        // shoelace by hand for the axis-aligned square
        assert!((r.area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn circle_polygon_area() {
        let r = Region::from_loops(&[RealLoop::circle([0.0, 0.0], 0.5)], &cfg()).unwrap();
        assert_eq!(r.outer.len(), 64);
        let n = 64.0;
        let polygon_area = 0.5 * n * 0.25 * (2.0 * PI / n).sin();
        assert!((r.area() - polygon_area).abs() < 1e-12);
        assert!((r.area() - PI / 4.0).abs() / (PI / 4.0) < 0.005);
    }

    #[test]
    fn quantized_circle_radius() {
        let seq =
            parse_sequence("SKETCH LOOP 0 0 CIRCLE 128 128 128 ENDLOOP ENDSKETCH END").unwrap();
        let r = build_profile(&seq.sketches[0], 64).unwrap();
        let rad = QuantLevel::new(128).unit();
        let expected = 0.5 * 64.0 * rad * rad * (2.0 * PI / 64.0).sin();
        assert!((r.area() - expected).abs() < 1e-12);
    }

    #[test]
    fn unclosed_loop() {
        let text =
            "SKETCH LOOP 0 0 LINE 255 0 LINE 255 255 LINE 0 255 LINE 0 10 ENDLOOP ENDSKETCH END";
        let seq = parse_sequence(text).unwrap();
        let e = build_profile(&seq.sketches[0], 64).unwrap_err();
        assert_eq!(e.code, DiagnosticCode::UnclosedLoop);
        assert_eq!(
            e.location,
            Location::Loop {
                sketch: 0,
                loop_index: 0
            }
        );
    }

    #[test]
    fn closure_tolerance_is_one_level() {
        // one level is 2/255 in sketch coordinates
        let near =
            "SKETCH LOOP 0 0 LINE 255 0 LINE 255 255 LINE 0 255 LINE 0 1 ENDLOOP ENDSKETCH END";
        assert!(build_profile(&parse_sequence(near).unwrap().sketches[0], 64).is_ok());
        let far =
            "SKETCH LOOP 0 0 LINE 255 0 LINE 255 255 LINE 0 255 LINE 0 2 ENDLOOP ENDSKETCH END";
        let e = build_profile(&parse_sequence(far).unwrap().sketches[0], 64).unwrap_err();
        assert_eq!(e.code, DiagnosticCode::UnclosedLoop);
    }

    #[test]
    fn semicircle_arc() {
        // half disc of radius 1: diameter along x, arc sweeping pi ccw back to start
        let lp = RealLoop {
            start: [-1.0, 0.0],
            curves: vec![
                RealCurve::Line { end: [1.0, 0.0] },
                RealCurve::Arc {
                    end: [-1.0, 0.0],
                    sweep: PI,
                    ccw: true,
                },
            ],
        };
        let r = Region::from_loops(&[lp], &cfg()).unwrap();
        // 32 chords of a half 64-gon
        let expected = 0.5 * 64.0 * (2.0 * PI / 64.0).sin() / 2.0;
        assert!((r.area() - expected).abs() < 1e-9, "{}", r.area());
        assert!(r.outer.iter().all(|p| p[1] >= -1e-12));
    }

    #[test]
    fn clockwise_arc_bulges_the_other_way() {
        let lp = RealLoop {
            start: [-1.0, 0.0],
            curves: vec![
                RealCurve::Arc {
                    end: [1.0, 0.0],
                    sweep: PI,
                    ccw: false,
                },
                RealCurve::Line { end: [-1.0, 0.0] },
            ],
        };
        let r = Region::from_loops(&[lp], &cfg()).unwrap();
        assert!(r.outer.iter().all(|p| p[1] >= -1e-12));
        assert!(r.outer.iter().any(|p| p[1] > 0.99));
    }

    #[test]
    fn holes_classified_by_containment() {
        let small = RealLoop::circle([0.0, 0.0], 0.25);
        let big = RealLoop::polygon(&[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]);
        let r = Region::from_loops(&[small, big], &cfg()).unwrap();
        assert_eq!(r.outer.len(), 4);
        assert_eq!(r.holes.len(), 1);
        assert!(polygon::signed_area(&r.holes[0]) < 0.0);
        assert!(!r.contains([0.0, 0.0]));
        assert!(r.contains([0.5, 0.5]));
        assert!((r.signed_distance([0.5, 0.0]) + 0.25).abs() < 1e-2);
    }

    #[test]
    fn hole_outside_outer_rejected() {
        let big = RealLoop::polygon(&[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]);
        let far = RealLoop::circle([3.0, 0.0], 0.25);
        let e = Region::from_loops(&[big, far], &cfg()).unwrap_err();
        assert_eq!(e.code, DiagnosticCode::ZeroAreaProfile);
    }

    #[test]
    fn degenerate_and_self_intersecting() {
        let flat = RealLoop::polygon(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert_eq!(
            Region::from_loops(&[flat], &cfg()).unwrap_err().code,
            DiagnosticCode::ZeroAreaProfile
        );
        let bow = RealLoop::polygon(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(
            Region::from_loops(&[bow], &cfg()).unwrap_err().code,
            DiagnosticCode::ZeroAreaProfile
        );
    }
}
