//! Sequence generators driven by the review loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::remote::{RemoteConfig, RemoteGenerator};
use crate::seq::GOLDEN_SQUARE;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum GeneratorError {
    #[error("generator unavailable after {attempts} request(s): {detail}")]
    Unavailable { attempts: u32, detail: String },
    #[error("malformed generator response: {0}")]
    MalformedResponse(String),
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
}

/// Text returned by a generator, with the number of retried requests it took.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    pub retries: u32,
}

impl Generation {
    pub fn new(text: impl Into<String>) -> Self {
        Generation {
            text: text.into(),
            retries: 0,
        }
    }
}

/// Something that maps a prompt to a candidate sequence text.
pub trait Generator {
    fn generate(&mut self, prompt: &str) -> Result<Generation, GeneratorError>;
}

/// A syntactically invalid attempt: the valid sequence without its `END` token.
pub fn invalid_output() -> String {
    GOLDEN_SQUARE
        .strip_suffix("END\n")
        .unwrap_or(GOLDEN_SQUARE)
        .to_string()
}

/// Fails on the first `fail_first_k` calls, then returns a valid sequence.
#[derive(Debug, Clone)]
pub struct DeterministicStub {
    fail_first_k: usize,
    calls: usize,
}

impl DeterministicStub {
    pub fn new(fail_first_k: usize) -> Self {
        DeterministicStub {
            fail_first_k,
            calls: 0,
        }
    }
}

impl Generator for DeterministicStub {
    fn generate(&mut self, _prompt: &str) -> Result<Generation, GeneratorError> {
        self.calls += 1;
        Ok(Generation::new(if self.calls <= self.fail_first_k {
            invalid_output()
        } else {
            GOLDEN_SQUARE.to_string()
        }))
    }
}

/// Each call independently returns an invalid sequence with probability `q`.
#[derive(Debug, Clone)]
pub struct StochasticStub {
    q: f64,
    rng: ChaCha8Rng,
}

impl StochasticStub {
    pub fn new(q: f64, seed: u64) -> Result<Self, GeneratorError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(GeneratorError::InvalidConfig(format!(
                "failure probability must be in [0, 1], got {q}"
            )));
        }
        Ok(StochasticStub {
            q,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl Generator for StochasticStub {
    fn generate(&mut self, _prompt: &str) -> Result<Generation, GeneratorError> {
        let fail = self.rng.random::<f64>() < self.q;
        Ok(Generation::new(if fail {
            invalid_output()
        } else {
            GOLDEN_SQUARE.to_string()
        }))
    }
}

/// How to obtain a generator for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorBinding {
    StubDeterministic { fail_first_k: usize },
    StubStochastic { fail_prob: f64 },
    Remote(RemoteConfig),
}

impl GeneratorBinding {
    /// A fresh generator for the prompt `x`. Stochastic stubs draw from a
    /// stream determined by `seed` and `x`, so the same prompt and seed see
    /// the same sequence of outcomes.
    pub fn instantiate(&self, x: &str, seed: u64) -> Result<Box<dyn Generator>, GeneratorError> {
        Ok(match self {
            GeneratorBinding::StubDeterministic { fail_first_k } => {
                Box::new(DeterministicStub::new(*fail_first_k))
            }
            GeneratorBinding::StubStochastic { fail_prob } => {
                Box::new(StochasticStub::new(*fail_prob, seed ^ fnv1a(x.as_bytes()))?)
            }
            GeneratorBinding::Remote(cfg) => Box::new(RemoteGenerator::new(cfg.clone())?),
        })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}
