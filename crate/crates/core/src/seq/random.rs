//! Random sequence generators for property tests, fuzzing and benchmarks.

use super::{
    BooleanOp, CadSequence, Curve, ExtrudeOp, Loop, QPoint, QuantLevel, Sketch, SketchPlane,
};
use rand::Rng;

fn level<R: Rng + ?Sized>(rng: &mut R) -> QuantLevel {
    QuantLevel::new(rng.random())
}

fn level_in<R: Rng + ?Sized>(rng: &mut R, lo: u8, hi: u8) -> QuantLevel {
    QuantLevel::new(rng.random_range(lo..=hi))
}

fn point<R: Rng + ?Sized>(rng: &mut R) -> QPoint {
    [level(rng), level(rng)]
}

fn plane<R: Rng + ?Sized>(rng: &mut R) -> SketchPlane {
    SketchPlane {
        origin: [level(rng), level(rng), level(rng)],
        orientation: [level(rng), level(rng), level(rng)],
    }
}

fn chain_loop<R: Rng + ?Sized>(rng: &mut R) -> Loop {
    let start = point(rng);
    let n = rng.random_range(3..=6);
    let curves = (0..n)
        .map(|i| {
            let end = if i + 1 == n { start } else { point(rng) };
            if rng.random_bool(0.3) {
                Curve::Arc {
                    end,
                    sweep: level_in(rng, 1, 254),
                    ccw: rng.random(),
                }
            } else {
                Curve::Line { end }
            }
        })
        .collect();
    Loop { start, curves }
}

fn circle_loop<R: Rng + ?Sized>(rng: &mut R) -> Loop {
    let center = point(rng);
    Loop {
        start: center,
        curves: vec![Curve::Circle {
            center,
            radius: level_in(rng, 1, 255),
        }],
    }
}

/// A structurally valid sequence (passes `validate_syntax`) with arbitrary
/// geometry; it need not compile.
pub fn random_sequence<R: Rng + ?Sized>(rng: &mut R) -> CadSequence {
    let n_sketches = rng.random_range(1..=3);
    let sketches = (0..n_sketches)
        .map(|_| {
            let n_loops = rng.random_range(1..=3);
            let loops = (0..n_loops)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        circle_loop(rng)
                    } else {
                        chain_loop(rng)
                    }
                })
                .collect();
            Sketch { loops }
        })
        .collect();
    let n_extrudes = rng.random_range(1..=4);
    let extrudes = (0..n_extrudes)
        .map(|i| {
            let boolean = if i == 0 {
                BooleanOp::NewBody
            } else {
                BooleanOp::ALL[rng.random_range(0..4)]
            };
            let extent_pos = level(rng);
            let extent_neg = if extent_pos.get() == 0 {
                level_in(rng, 1, 255)
            } else {
                level(rng)
            };
            ExtrudeOp {
                sketch_index: rng.random_range(0..n_sketches),
                plane: plane(rng),
                extent_pos,
                extent_neg,
                sketch_scale: level_in(rng, 1, 255),
                boolean,
            }
        })
        .collect();
    CadSequence {
        sketches,
        extrudes,
        terminated: true,
    }
}

/// A sequence of 1 to `max_bodies` joined rectangles and circles that always compiles.
pub fn random_solid_sequence<R: Rng + ?Sized>(rng: &mut R, max_bodies: usize) -> CadSequence {
    let n = rng.random_range(1..=max_bodies.max(1));
    let mut seq = CadSequence {
        terminated: true,
        ..Default::default()
    };
    for i in 0..n {
        let lp = if rng.random_bool(0.3) {
            let center = [level_in(rng, 96, 160), level_in(rng, 96, 160)];
            Loop {
                start: center,
                curves: vec![Curve::Circle {
                    center,
                    radius: level_in(rng, 40, 120),
                }],
            }
        } else {
            let x0 = rng.random_range(0..=100u8);
            let y0 = rng.random_range(0..=100u8);
            let x1 = rng.random_range(155..=255u8);
            let y1 = rng.random_range(155..=255u8);
            let q = QuantLevel::new;
            Loop {
                start: [q(x0), q(y0)],
                curves: vec![
                    Curve::Line {
                        end: [q(x1), q(y0)],
                    },
                    Curve::Line {
                        end: [q(x1), q(y1)],
                    },
                    Curve::Line {
                        end: [q(x0), q(y1)],
                    },
                    Curve::Line {
                        end: [q(x0), q(y0)],
                    },
                ],
            }
        };
        seq.sketches.push(Sketch { loops: vec![lp] });
        let orientation = if rng.random_bool(0.5) {
            [QuantLevel::MIN; 3]
        } else {
            [level(rng), level(rng), level(rng)]
        };
        seq.extrudes.push(ExtrudeOp {
            sketch_index: i,
            plane: SketchPlane {
                origin: [
                    level_in(rng, 96, 160),
                    level_in(rng, 96, 160),
                    level_in(rng, 96, 160),
                ],
                orientation,
            },
            extent_pos: level_in(rng, 30, 255),
            extent_neg: level_in(rng, 0, 128),
            sketch_scale: level_in(rng, 80, 255),
            boolean: if i == 0 {
                BooleanOp::NewBody
            } else {
                BooleanOp::Join
            },
        });
    }
    seq
}
