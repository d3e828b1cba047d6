//! Verification and alignment-data toolkit for sketch-and-extrude CAD sequences.
//!
//! The crate is organised the way data flows through it:
//!
//! - [`seq`]: the sequence data model, its canonical text grammar, 8-bit
//!   quantization and DeepCAD JSON ingestion.
//! - [`geom`]: a restricted solid kernel that compiles sequences into
//!   extruded prisms combined by implicit CSG, tessellates their boundary and
//!   samples point clouds.
//! - [`judge`]: Chamfer distance, the compile-and-compare judge and the
//!   binary / paired preference dataset builders.
//! - [`metrics`]: per-primitive F1, Chamfer statistics and invalidity ratio.
//! - [`review`]: compiler review, prompt augmentation and the bounded
//!   generate/review loop, including an OpenAI-compatible remote generator.
//! - [`kto`]: implied reward, reference point, value function, KTO and SFT
//!   losses on caller-supplied log-probabilities.
//!
//! Data-parallel inner loops run on rayon when the `parallel` feature is
//! enabled (the default); see [`par::Exec`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geom;
pub mod judge;
pub mod kto;
pub mod metrics;
pub mod par;
pub mod review;
pub mod seq;

pub use geom::{compile_sequence, CompiledModel, KernelConfig, KernelError, Mesh, PointCloud};
pub use judge::{chamfer_distance, judge, CjmConfig, JudgeVerdict, PreferenceRecord};
pub use seq::{parse_sequence, print_sequence, CadSequence, Diagnostic, DiagnosticCode};
