use serde::{Deserialize, Serialize};
use std::fmt;

/// Failure classes reported by the parser, the structural validator and the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagnosticCode {
    MissingEndToken,
    UnknownToken,
    OutOfRangeParam,
    UnclosedLoop,
    ZeroAreaProfile,
    InvalidExtrusion,
    BooleanViolation,
    EmptyResult,
    BadReference,
}

impl DiagnosticCode {
    pub const ALL: [DiagnosticCode; 9] = [
        DiagnosticCode::MissingEndToken,
        DiagnosticCode::UnknownToken,
        DiagnosticCode::OutOfRangeParam,
        DiagnosticCode::UnclosedLoop,
        DiagnosticCode::ZeroAreaProfile,
        DiagnosticCode::InvalidExtrusion,
        DiagnosticCode::BooleanViolation,
        DiagnosticCode::EmptyResult,
        DiagnosticCode::BadReference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::MissingEndToken => "MissingEndToken",
            DiagnosticCode::UnknownToken => "UnknownToken",
            DiagnosticCode::OutOfRangeParam => "OutOfRangeParam",
            DiagnosticCode::UnclosedLoop => "UnclosedLoop",
            DiagnosticCode::ZeroAreaProfile => "ZeroAreaProfile",
            DiagnosticCode::InvalidExtrusion => "InvalidExtrusion",
            DiagnosticCode::BooleanViolation => "BooleanViolation",
            DiagnosticCode::EmptyResult => "EmptyResult",
            DiagnosticCode::BadReference => "BadReference",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open range of token indices `[start, end)` into the whitespace-tokenized input.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub const fn at(index: usize) -> Self {
        Span {
            start: index,
            end: index + 1,
        }
    }

    pub const fn len(&self) -> usize {
        self.end - self.start
    }

    pub const fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tokens {}..{}", self.start, self.end)
    }
}

/// Structural position of a problem inside a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Location {
    Sequence,
    Sketch {
        sketch: usize,
    },
    Loop {
        sketch: usize,
        loop_index: usize,
    },
    Curve {
        sketch: usize,
        loop_index: usize,
        curve: usize,
    },
    Extrude {
        extrude: usize,
    },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Location::Sequence => f.write_str("sequence"),
            Location::Sketch { sketch } => write!(f, "sketch {sketch}"),
            Location::Loop { sketch, loop_index } => write!(f, "sketch {sketch} loop {loop_index}"),
            Location::Curve {
                sketch,
                loop_index,
                curve,
            } => {
                write!(f, "sketch {sketch} loop {loop_index} curve {curve}")
            }
            Location::Extrude { extrude } => write!(f, "extrude {extrude}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Location>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: DiagnosticCode, span: Span, message: impl Into<String>) -> Self {
        let message = message.into();
        debug_assert!(!message.is_empty());
        Diagnostic {
            code,
            span,
            location: None,
            message,
        }
    }

    pub fn with_location(mut self, location: Location) -> Self {
        self.location = Some(location);
        self
    }

    /// `Code at <where>: message`, the form used in feedback and JSONL records.
    pub fn summary(&self) -> String {
        match self.location {
            Some(loc) => format!("{} at {} ({}): {}", self.code, loc, self.span, self.message),
            None => format!("{} at {}: {}", self.code, self.span, self.message),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}
