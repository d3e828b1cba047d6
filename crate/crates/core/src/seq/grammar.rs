//! Canonical text grammar.
//!
//! ```text
//! SKETCH
//! LOOP sx sy
//! LINE ex ey
//! ARC ex ey sweep ccw
//! CIRCLE cx cy r
//! ENDLOOP
//! ENDSKETCH
//! EXTRUDE k ox oy oz ta tb tc epos eneg scale bool
//! END
//! ```
//!
//! The reader works on the whitespace-separated token stream, so line breaks
//! are not significant. It recovers after errors and reports every problem it
//! can find, earliest first.

use super::{
    BooleanOp, CadSequence, Curve, Diagnostic, DiagnosticCode, ExtrudeOp, Location, Loop,
    QuantLevel, Sketch, SketchPlane, Span,
};
use std::fmt::Write as _;

const KEYWORDS: [&str; 9] = [
    "SKETCH",
    "LOOP",
    "LINE",
    "ARC",
    "CIRCLE",
    "ENDLOOP",
    "ENDSKETCH",
    "EXTRUDE",
    "END",
];

/// Token spans of every element of a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Layout {
    pub sketches: Vec<SketchLayout>,
    pub extrudes: Vec<Span>,
    /// Span of the `END` token, or the empty span at the end of input when absent.
    pub end: Span,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SketchLayout {
    pub span: Span,
    pub loops: Vec<LoopLayout>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoopLayout {
    pub span: Span,
    pub curves: Vec<Span>,
}

impl Layout {
    /// Layout of the canonical text of `seq`.
    pub fn canonical(seq: &CadSequence) -> Layout {
        let mut pos = 0;
        let mut layout = Layout::default();
        for sk in &seq.sketches {
            let start = pos;
            pos += 1;
            let mut loops = Vec::with_capacity(sk.loops.len());
            for lp in &sk.loops {
                let lstart = pos;
                pos += 3;
                let curves = lp
                    .curves
                    .iter()
                    .map(|c| {
                        let s = Span::new(pos, pos + curve_tokens(c));
                        pos = s.end;
                        s
                    })
                    .collect();
                pos += 1;
                loops.push(LoopLayout {
                    span: Span::new(lstart, pos),
                    curves,
                });
            }
            pos += 1;
            layout.sketches.push(SketchLayout {
                span: Span::new(start, pos),
                loops,
            });
        }
        for _ in &seq.extrudes {
            layout.extrudes.push(Span::new(pos, pos + 12));
            pos += 12;
        }
        if seq.terminated {
            layout.end = Span::at(pos);
            pos += 1;
        } else {
            layout.end = Span::new(pos, pos);
        }
        layout.token_count = pos;
        layout
    }

    /// Best span for a structural location; falls back to the enclosing element.
    pub fn span_of(&self, loc: Location) -> Span {
        let whole = Span::new(0, self.token_count);
        match loc {
            Location::Sequence => whole,
            Location::Sketch { sketch } => self.sketches.get(sketch).map_or(whole, |s| s.span),
            Location::Loop { sketch, loop_index } => self
                .sketches
                .get(sketch)
                .and_then(|s| s.loops.get(loop_index))
                .map_or_else(|| self.span_of(Location::Sketch { sketch }), |l| l.span),
            Location::Curve {
                sketch,
                loop_index,
                curve,
            } => self
                .sketches
                .get(sketch)
                .and_then(|s| s.loops.get(loop_index))
                .and_then(|l| l.curves.get(curve).copied())
                .unwrap_or_else(|| self.span_of(Location::Loop { sketch, loop_index })),
            Location::Extrude { extrude } => self.extrudes.get(extrude).copied().unwrap_or(whole),
        }
    }
}

fn curve_tokens(c: &Curve) -> usize {
    match c {
        Curve::Line { .. } => 3,
        Curve::Arc { .. } => 5,
        Curve::Circle { .. } => 4,
    }
}

/// Canonical text: one command per line, single spaces, newline-terminated.
/// `END` is written only when `seq.terminated` is set.
pub fn print_sequence(seq: &CadSequence) -> String {
    let mut out = String::new();
    for sk in &seq.sketches {
        out.push_str("SKETCH\n");
        for lp in &sk.loops {
            let _ = writeln!(out, "LOOP {} {}", lp.start[0], lp.start[1]);
            for c in &lp.curves {
                let _ = match *c {
                    Curve::Line { end } => writeln!(out, "LINE {} {}", end[0], end[1]),
                    Curve::Arc { end, sweep, ccw } => {
                        writeln!(out, "ARC {} {} {} {}", end[0], end[1], sweep, u8::from(ccw))
                    }
                    Curve::Circle { center, radius } => {
                        writeln!(out, "CIRCLE {} {} {}", center[0], center[1], radius)
                    }
                };
            }
            out.push_str("ENDLOOP\n");
        }
        out.push_str("ENDSKETCH\n");
    }
    for ex in &seq.extrudes {
        let [ox, oy, oz] = ex.plane.origin;
        let [ta, tb, tc] = ex.plane.orientation;
        let _ = writeln!(
            out,
            "EXTRUDE {} {ox} {oy} {oz} {ta} {tb} {tc} {} {} {} {}",
            ex.sketch_index, ex.extent_pos, ex.extent_neg, ex.sketch_scale, ex.boolean
        );
    }
    if seq.terminated {
        out.push_str("END\n");
    }
    out
}

/// Parses canonical text. On failure returns every diagnostic found, earliest span first.
pub fn parse_sequence(text: &str) -> Result<CadSequence, Vec<Diagnostic>> {
    parse_with_layout(text).map(|(seq, _)| seq)
}

/// Parses arbitrary bytes; invalid UTF-8 is replaced and then reported as unknown tokens.
pub fn parse_bytes(bytes: &[u8]) -> Result<CadSequence, Vec<Diagnostic>> {
    parse_sequence(&String::from_utf8_lossy(bytes))
}

/// Like [`parse_sequence`] but also returns the token spans of the input.
pub fn parse_with_layout(text: &str) -> Result<(CadSequence, Layout), Vec<Diagnostic>> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut p = Parser {
        toks: &tokens,
        pos: 0,
        diags: Vec::new(),
        seq: CadSequence::default(),
        layout: Layout::default(),
    };
    p.run();
    let Parser {
        mut diags,
        seq,
        mut layout,
        ..
    } = p;
    layout.token_count = tokens.len();
    for (i, ex) in seq.extrudes.iter().enumerate() {
        if ex.sketch_index >= seq.sketches.len() {
            let span = layout.extrudes[i];
            diags.push(
                Diagnostic::new(
                    DiagnosticCode::BadReference,
                    Span::at(span.start + 1),
                    format!(
                        "extrude references sketch {} but only {} sketch(es) exist",
                        ex.sketch_index,
                        seq.sketches.len()
                    ),
                )
                .with_location(Location::Extrude { extrude: i }),
            );
        }
    }
    if diags.is_empty() {
        Ok((seq, layout))
    } else {
        diags.sort_by_key(|d| (d.span.start, d.span.end));
        Err(diags)
    }
}

enum State {
    Top,
    Sketch {
        start: usize,
    },
    Loop {
        sketch_start: usize,
        loop_start: usize,
        lp: Loop,
        curves: Vec<Span>,
        valid: bool,
    },
}

struct Parser<'a> {
    toks: &'a [&'a str],
    pos: usize,
    diags: Vec<Diagnostic>,
    seq: CadSequence,
    layout: Layout,
}

/// Outcome of reading one numeric argument.
enum Arg {
    Ok(i64),
    /// Integer literal that does not fit; already consumed.
    Overflow,
    /// Not an integer (or end of input); not consumed.
    Missing,
}

impl Parser<'_> {
    fn run(&mut self) {
        let mut state = State::Top;
        let mut sketch_loops: Vec<LoopLayout> = Vec::new();
        let mut pending_loops: Vec<Loop> = Vec::new();
        while self.pos < self.toks.len() {
            let at = self.pos;
            let tok = self.toks[at];
            state = match (state, tok) {
                (State::Top, "SKETCH") => {
                    self.pos += 1;
                    sketch_loops.clear();
                    pending_loops.clear();
                    State::Sketch { start: at }
                }
                (State::Top, "EXTRUDE") => {
                    self.extrude();
                    State::Top
                }
                (s @ State::Top, "END")
                | (s @ (State::Sketch { .. } | State::Loop { .. }), "END") => {
                    if !matches!(s, State::Top) {
                        self.diags.push(Diagnostic::new(
                            DiagnosticCode::UnknownToken,
                            Span::at(at),
                            "END inside an unterminated SKETCH or LOOP",
                        ));
                    }
                    self.pos += 1;
                    self.seq.terminated = true;
                    self.layout.end = Span::at(at);
                    if self.pos < self.toks.len() {
                        self.diags.push(Diagnostic::new(
                            DiagnosticCode::UnknownToken,
                            Span::new(self.pos, self.toks.len()),
                            format!("unexpected token `{}` after END", self.toks[self.pos]),
                        ));
                    }
                    return;
                }
                (State::Sketch { start }, "LOOP") => {
                    self.pos += 1;
                    let sx = self.level("loop start x");
                    let sy = self.level("loop start y");
                    let valid = sx.is_some() && sy.is_some();
                    let start_pt = [sx.unwrap_or_default(), sy.unwrap_or_default()];
                    State::Loop {
                        sketch_start: start,
                        loop_start: at,
                        lp: Loop {
                            start: start_pt,
                            curves: Vec::new(),
                        },
                        curves: Vec::new(),
                        valid,
                    }
                }
                (State::Sketch { start }, "ENDSKETCH") => {
                    self.pos += 1;
                    self.seq.sketches.push(Sketch {
                        loops: std::mem::take(&mut pending_loops),
                    });
                    self.layout.sketches.push(SketchLayout {
                        span: Span::new(start, self.pos),
                        loops: std::mem::take(&mut sketch_loops),
                    });
                    State::Top
                }
                (
                    State::Loop {
                        sketch_start,
                        loop_start,
                        mut lp,
                        mut curves,
                        mut valid,
                    },
                    kw @ ("LINE" | "ARC" | "CIRCLE"),
                ) => {
                    self.pos += 1;
                    match self.curve(kw, &lp) {
                        Some(c) => {
                            lp.curves.push(c);
                            curves.push(Span::new(at, self.pos));
                        }
                        None => valid = false,
                    }
                    State::Loop {
                        sketch_start,
                        loop_start,
                        lp,
                        curves,
                        valid,
                    }
                }
                (
                    State::Loop {
                        sketch_start,
                        loop_start,
                        lp,
                        curves,
                        valid,
                    },
                    "ENDLOOP",
                ) => {
                    self.pos += 1;
                    if valid {
                        pending_loops.push(lp);
                        sketch_loops.push(LoopLayout {
                            span: Span::new(loop_start, self.pos),
                            curves,
                        });
                    }
                    State::Sketch {
                        start: sketch_start,
                    }
                }
                (s, tok) => {
                    let context = match s {
                        State::Top => "at top level",
                        State::Sketch { .. } => "inside SKETCH",
                        State::Loop { .. } => "inside LOOP",
                    };
                    self.pos += 1;
                    // Absorb the numeric arguments of the unexpected command.
                    while self.pos < self.toks.len() && is_integer_literal(self.toks[self.pos]) {
                        self.pos += 1;
                    }
                    let msg = if KEYWORDS.contains(&tok) {
                        format!("unexpected `{tok}` {context}")
                    } else {
                        format!("unknown token `{tok}` {context}")
                    };
                    self.diags.push(Diagnostic::new(
                        DiagnosticCode::UnknownToken,
                        Span::new(at, self.pos),
                        msg,
                    ));
                    s
                }
            };
        }
        let n = self.toks.len();
        self.layout.end = Span::new(n, n);
        self.diags.push(Diagnostic::new(
            DiagnosticCode::MissingEndToken,
            Span::new(n, n),
            "sequence is not terminated by END",
        ));
    }

    fn curve(&mut self, kw: &str, lp: &Loop) -> Option<Curve> {
        let at = self.pos - 1;
        if lp.is_circle() || (kw == "CIRCLE" && !lp.curves.is_empty()) {
            // Still consume the arguments so recovery continues at the next command.
            while self.pos < self.toks.len() && is_integer_literal(self.toks[self.pos]) {
                self.pos += 1;
            }
            self.diags.push(Diagnostic::new(
                DiagnosticCode::UnknownToken,
                Span::new(at, self.pos),
                format!("`{kw}` cannot share a loop with a CIRCLE"),
            ));
            return None;
        }
        match kw {
            "LINE" => {
                let x = self.level("line end x");
                let y = self.level("line end y");
                Some(Curve::Line { end: [x?, y?] })
            }
            "ARC" => {
                let x = self.level("arc end x");
                let y = self.level("arc end y");
                let sweep = self.level("arc sweep");
                let ccw = self.flag("arc direction");
                Some(Curve::Arc {
                    end: [x?, y?],
                    sweep: sweep?,
                    ccw: ccw?,
                })
            }
            _ => {
                let x = self.level("circle center x");
                let y = self.level("circle center y");
                let r = self.level("circle radius");
                Some(Curve::Circle {
                    center: [x?, y?],
                    radius: r?,
                })
            }
        }
    }

    fn extrude(&mut self) {
        let at = self.pos;
        self.pos += 1;
        let k = match self.int("sketch index") {
            Some(v) if v >= 0 => Some(v as usize),
            Some(v) => {
                self.diags.push(Diagnostic::new(
                    DiagnosticCode::OutOfRangeParam,
                    Span::at(self.pos - 1),
                    format!("sketch index {v} is negative"),
                ));
                None
            }
            None => None,
        };
        let names = [
            "origin x",
            "origin y",
            "origin z",
            "angle a",
            "angle b",
            "angle c",
            "positive extent",
            "negative extent",
            "sketch scale",
        ];
        let vals: Vec<Option<QuantLevel>> = names.iter().map(|n| self.level(n)).collect();
        let boolean = self.boolean();
        let (Some(k), Some(boolean)) = (k, boolean) else {
            return;
        };
        let Some(v) = vals.into_iter().collect::<Option<Vec<_>>>() else {
            return;
        };
        self.seq.extrudes.push(ExtrudeOp {
            sketch_index: k,
            plane: SketchPlane {
                origin: [v[0], v[1], v[2]],
                orientation: [v[3], v[4], v[5]],
            },
            extent_pos: v[6],
            extent_neg: v[7],
            sketch_scale: v[8],
            boolean,
        });
        self.layout.extrudes.push(Span::new(at, self.pos));
    }

    fn boolean(&mut self) -> Option<BooleanOp> {
        match self.toks.get(self.pos) {
            Some(t) => {
                if let Some(op) = BooleanOp::from_token(t) {
                    self.pos += 1;
                    return Some(op);
                }
                let msg = format!("expected boolean NEW|JOIN|CUT|INT, found `{t}`");
                let span = Span::at(self.pos);
                if !KEYWORDS.contains(t) {
                    self.pos += 1;
                }
                self.diags
                    .push(Diagnostic::new(DiagnosticCode::UnknownToken, span, msg));
                None
            }
            None => {
                self.missing("boolean operation");
                None
            }
        }
    }

    fn arg(&mut self) -> Arg {
        let Some(tok) = self.toks.get(self.pos) else {
            return Arg::Missing;
        };
        if !is_integer_literal(tok) {
            return Arg::Missing;
        }
        self.pos += 1;
        match tok.parse::<i64>() {
            Ok(v) => Arg::Ok(v),
            Err(_) => Arg::Overflow,
        }
    }

    fn int(&mut self, what: &str) -> Option<i64> {
        match self.arg() {
            Arg::Ok(v) => Some(v),
            Arg::Overflow => {
                self.diags.push(Diagnostic::new(
                    DiagnosticCode::OutOfRangeParam,
                    Span::at(self.pos - 1),
                    format!(
                        "{what} `{}` does not fit an integer",
                        self.toks[self.pos - 1]
                    ),
                ));
                None
            }
            Arg::Missing => {
                self.missing(what);
                None
            }
        }
    }

    fn level(&mut self, what: &str) -> Option<QuantLevel> {
        let v = self.int(what)?;
        match QuantLevel::from_int(v) {
            Some(q) => Some(q),
            None => {
                self.diags.push(Diagnostic::new(
                    DiagnosticCode::OutOfRangeParam,
                    Span::at(self.pos - 1),
                    format!("{what} {v} is outside the quantization range 0..=255"),
                ));
                None
            }
        }
    }

    fn flag(&mut self, what: &str) -> Option<bool> {
        match self.int(what)? {
            0 => Some(false),
            1 => Some(true),
            v => {
                self.diags.push(Diagnostic::new(
                    DiagnosticCode::OutOfRangeParam,
                    Span::at(self.pos - 1),
                    format!("{what} flag must be 0 or 1, found {v}"),
                ));
                None
            }
        }
    }

    fn missing(&mut self, what: &str) {
        let (span, found) = match self.toks.get(self.pos) {
            Some(t) => (Span::at(self.pos), format!("`{t}`")),
            None => (Span::new(self.pos, self.pos), "end of input".to_string()),
        };
        self.diags.push(Diagnostic::new(
            DiagnosticCode::UnknownToken,
            span,
            format!("expected {what}, found {found}"),
        ));
    }
}

fn is_integer_literal(tok: &str) -> bool {
    let digits = tok.strip_prefix(['-', '+']).unwrap_or(tok);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}
