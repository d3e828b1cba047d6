//! Compiler review and the bounded generate/review loop.
//!
//! [`review`] runs a candidate through parsing, structural validation and
//! compilation and turns every problem into a feedback line. The loop feeds
//! that feedback back into the next prompt until a candidate compiles or the
//! round budget is spent. Nothing here sees ground-truth data.

mod generator;
pub mod mock;
mod remote;

pub use generator::{
    invalid_output, DeterministicStub, Generation, Generator, GeneratorBinding, GeneratorError,
    StochasticStub,
};
pub use remote::{extract_completion, RemoteConfig, RemoteGenerator};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{compile_sequence_with, KernelConfig};
use crate::par::Exec;
use crate::seq::{parse_with_layout, validate_with_layout, Diagnostic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewReport {
    pub valid: bool,
    pub diagnostics: Vec<Diagnostic>,
    /// One line per diagnostic; empty for a valid report.
    pub feedback_text: String,
}

impl ReviewReport {
    fn from_diagnostics(diagnostics: Vec<Diagnostic>) -> Self {
        let feedback_text = diagnostics
            .iter()
            .map(Diagnostic::summary)
            .collect::<Vec<_>>()
            .join("\n");
        ReviewReport {
            valid: diagnostics.is_empty(),
            diagnostics,
            feedback_text,
        }
    }
}

/// Reviews a candidate with the default kernel settings.
pub fn review(seq_text: &str) -> ReviewReport {
    review_with(seq_text, &KernelConfig::default(), Exec::auto())
}

/// Parse, then validate, then compile. Each stage only runs when the previous
/// one is clean, and the report holds every diagnostic of the failing stage.
pub fn review_with(seq_text: &str, kernel: &KernelConfig, exec: Exec) -> ReviewReport {
    let (seq, layout) = match parse_with_layout(seq_text) {
        Ok(v) => v,
        Err(diags) => return ReviewReport::from_diagnostics(diags),
    };
    let diags = validate_with_layout(&seq, &layout);
    if !diags.is_empty() {
        return ReviewReport::from_diagnostics(diags);
    }
    match compile_sequence_with(&seq, kernel, exec) {
        Ok(_) => ReviewReport::from_diagnostics(Vec::new()),
        Err(e) => ReviewReport::from_diagnostics(vec![e.to_diagnostic(&layout)]),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReviewError {
    #[error("the report is valid; there is nothing to repair")]
    NothingToRepair,
}

/// Prompt for the next attempt: the original request, the rejected attempt,
/// the compiler feedback and a repair instruction.
pub fn augment_prompt(
    x: &str,
    report: &ReviewReport,
    prev_seq: &str,
) -> Result<String, ReviewError> {
    if report.valid {
        return Err(ReviewError::NothingToRepair);
    }
    Ok(format!(
        "{x}\n\n\
         Previous attempt:\n{}\n\n\
         The CAD compiler rejected the previous attempt:\n{}\n\n\
         Write a corrected CAD sequence for the request above. Reply with the sequence only.\n",
        prev_seq.trim_end(),
        report.feedback_text
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    /// Review-and-regenerate rounds after the first generation.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_iters: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub prompt: String,
    pub sequence: String,
    pub report: ReviewReport,
    /// Retried requests the generator needed for this attempt.
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub attempts: Vec<Attempt>,
    pub final_valid: bool,
    pub iterations_used: usize,
}

impl LoopTrace {
    fn new(attempts: Vec<Attempt>) -> Self {
        let final_valid = attempts.last().is_some_and(|a| a.report.valid);
        let iterations_used = attempts.len().saturating_sub(1);
        LoopTrace {
            attempts,
            final_valid,
            iterations_used,
        }
    }

    /// The last generated sequence, if any.
    pub fn final_sequence(&self) -> Option<&str> {
        self.attempts.last().map(|a| a.sequence.as_str())
    }
}

/// Generator failure together with the trace recorded before it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct LoopError {
    pub trace: LoopTrace,
    pub error: GeneratorError,
}

/// Generates for `x`, reviewing each attempt and regenerating from the
/// augmented prompt until an attempt is valid or `max_iters` rounds are used.
pub fn run_agentic_loop(
    x: &str,
    gen: &GeneratorBinding,
    cfg: &LoopConfig,
) -> Result<LoopTrace, LoopError> {
    let mut generator = gen.instantiate(x, cfg.seed).map_err(|error| LoopError {
        trace: LoopTrace::new(Vec::new()),
        error,
    })?;
    run_loop_with(
        x,
        generator.as_mut(),
        cfg,
        &KernelConfig::default(),
        Exec::auto(),
    )
}

pub fn run_loop_with(
    x: &str,
    generator: &mut dyn Generator,
    cfg: &LoopConfig,
    kernel: &KernelConfig,
    exec: Exec,
) -> Result<LoopTrace, LoopError> {
    let mut attempts: Vec<Attempt> = Vec::with_capacity(cfg.max_iters + 1);
    let mut prompt = x.to_string();
    for round in 0..=cfg.max_iters {
        let generation = match generator.generate(&prompt) {
            Ok(g) => g,
            Err(error) => {
                return Err(LoopError {
                    trace: LoopTrace::new(attempts),
                    error,
                })
            }
        };
        let report = review_with(&generation.text, kernel, exec);
        let valid = report.valid;
        let next = (!valid && round < cfg.max_iters)
            .then(|| augment_prompt(x, &report, &generation.text).expect("report is invalid"));
        attempts.push(Attempt {
            prompt,
            sequence: generation.text,
            report,
            retries: generation.retries,
        });
        match next {
            Some(p) => prompt = p,
            None => break,
        }
    }
    Ok(LoopTrace::new(attempts))
}
