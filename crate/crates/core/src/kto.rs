//! KTO alignment objective and SFT cross-entropy on caller-supplied log-probabilities.
//!
//! Nothing here runs a model: sequence-level log-probabilities under the
//! policy and the frozen reference model come from the caller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KtoError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("reference point needs at least two examples, got {0}")]
    BatchTooSmall(usize),
    #[error("example {index}: {detail}")]
    InvalidExample { index: usize, detail: String },
    #[error("invalid KTO configuration: {0}")]
    InvalidConfig(String),
    #[error("sequence {sequence} token {token}: probability {value} is outside (0, 1]")]
    InvalidProbability {
        sequence: usize,
        token: usize,
        value: f64,
    },
    #[error("sequence {0} has no tokens")]
    EmptySequence(usize),
}

/// One labelled completion with its log-probabilities (nats, summed over tokens).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KtoExample {
    pub policy_logprob: f64,
    pub ref_logprob: f64,
    pub desirable: bool,
    /// Policy log-probability of this example's prompt paired with the next
    /// example's completion, when the caller computed it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_policy_logprob: Option<f64>,
    /// Reference log-probability of the same mismatched pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_ref_logprob: Option<f64>,
}

impl KtoExample {
    pub fn new(policy_logprob: f64, ref_logprob: f64, desirable: bool) -> Self {
        KtoExample {
            policy_logprob,
            ref_logprob,
            desirable,
            kl_policy_logprob: None,
            kl_ref_logprob: None,
        }
    }

    pub fn validate(&self, index: usize) -> Result<(), KtoError> {
        let bad = |detail: String| Err(KtoError::InvalidExample { index, detail });
        for (name, v) in [
            ("policy_logprob", Some(self.policy_logprob)),
            ("ref_logprob", Some(self.ref_logprob)),
        ]
        .into_iter()
        .chain([
            ("kl_policy_logprob", self.kl_policy_logprob),
            ("kl_ref_logprob", self.kl_ref_logprob),
        ]) {
            if let Some(v) = v {
                if !v.is_finite() || v > 0.0 {
                    return bad(format!("{name} must be finite and <= 0, got {v}"));
                }
            }
        }
        if self.kl_policy_logprob.is_some() != self.kl_ref_logprob.is_some() {
            return bad("kl_policy_logprob and kl_ref_logprob must be given together".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KtoConfig {
    pub beta: f64,
    pub lambda_d: f64,
    pub lambda_u: f64,
}

impl Default for KtoConfig {
    fn default() -> Self {
        KtoConfig {
            beta: 0.1,
            lambda_d: 1.0,
            lambda_u: 1.0,
        }
    }
}

impl KtoConfig {
    pub fn validate(&self) -> Result<(), KtoError> {
        for (name, v) in [
            ("beta", self.beta),
            ("lambda_d", self.lambda_d),
            ("lambda_u", self.lambda_u),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(KtoError::InvalidConfig(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn lambda(&self, desirable: bool) -> f64 {
        if desirable {
            self.lambda_d
        } else {
            self.lambda_u
        }
    }
}

/// Logistic function, evaluated without overflow for large `|t|`.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log pi(y|x) - log pi_ref(y|x)`.
pub fn implied_reward(ex: &KtoExample) -> f64 {
    ex.policy_logprob - ex.ref_logprob
}

/// Batch estimate of the policy/reference KL, clamped at zero.
///
/// Each example contributes the log-ratio of its prompt paired with the next
/// example's completion (cyclically). Callers that scored those mismatched
/// pairs supply them in `kl_*_logprob`; otherwise the next example's own
/// implied reward stands in.
pub fn estimate_z0(batch: &[KtoExample]) -> Result<f64, KtoError> {
    if batch.len() < 2 {
        return Err(KtoError::BatchTooSmall(batch.len()));
    }
    for (i, ex) in batch.iter().enumerate() {
        ex.validate(i)?;
    }
    let n = batch.len();
    let sum: f64 = (0..n)
        .map(
            |i| match (batch[i].kl_policy_logprob, batch[i].kl_ref_logprob) {
                (Some(p), Some(r)) => p - r,
                _ => implied_reward(&batch[(i + 1) % n]),
            },
        )
        .sum();
    Ok((sum / n as f64).max(0.0))
}

/// Signed logit of the value function: `beta (r - z0)` for desirable samples,
/// `beta (z0 - r)` for undesirable ones.
fn logit(ex: &KtoExample, z0: f64, cfg: &KtoConfig) -> f64 {
    let d = implied_reward(ex) - z0;
    cfg.beta * if ex.desirable { d } else { -d }
}

/// Prospect-style value `lambda_y * sigmoid(logit)`.
pub fn kto_value(ex: &KtoExample, z0: f64, cfg: &KtoConfig) -> f64 {
    cfg.lambda(ex.desirable) * sigmoid(logit(ex, z0, cfg))
}

fn check_batch(batch: &[KtoExample], cfg: &KtoConfig) -> Result<(), KtoError> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(KtoError::EmptyBatch);
    }
    for (i, ex) in batch.iter().enumerate() {
        ex.validate(i)?;
    }
    Ok(())
}

/// Mean of `lambda_y - v(x, y)`; `z0` is a constant.
pub fn kto_loss(batch: &[KtoExample], z0: f64, cfg: &KtoConfig) -> Result<f64, KtoError> {
    check_batch(batch, cfg)?;
    let sum: f64 = batch
        .iter()
        .map(|ex| cfg.lambda(ex.desirable) * sigmoid(-logit(ex, z0, cfg)))
        .sum();
    Ok(sum / batch.len() as f64)
}

/// Derivative of [`kto_loss`] with respect to each example's `policy_logprob`.
pub fn kto_grad(batch: &[KtoExample], z0: f64, cfg: &KtoConfig) -> Result<Vec<f64>, KtoError> {
    check_batch(batch, cfg)?;
    let n = batch.len() as f64;
    Ok(batch
        .iter()
        .map(|ex| {
            let s = sigmoid(logit(ex, z0, cfg));
            let slope = cfg.lambda(ex.desirable) * cfg.beta * s * (1.0 - s) / n;
            if ex.desirable {
                -slope
            } else {
                slope
            }
        })
        .collect())
}

/// Central finite differences of [`kto_loss`] in each `policy_logprob`, for checking [`kto_grad`].
pub fn kto_grad_numeric(
    batch: &[KtoExample],
    z0: f64,
    cfg: &KtoConfig,
    h: f64,
) -> Result<Vec<f64>, KtoError> {
    check_batch(batch, cfg)?;
    let mut work = batch.to_vec();
    let mut out = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let base = work[i].policy_logprob;
        // The loss is defined for any real log-probability, so step past 0 if needed.
        work[i].policy_logprob = base + h;
        let up: f64 = loss_unchecked(&work, z0, cfg);
        work[i].policy_logprob = base - h;
        let down: f64 = loss_unchecked(&work, z0, cfg);
        work[i].policy_logprob = base;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

fn loss_unchecked(batch: &[KtoExample], z0: f64, cfg: &KtoConfig) -> f64 {
    batch
        .iter()
        .map(|ex| cfg.lambda(ex.desirable) * sigmoid(-logit(ex, z0, cfg)))
        .sum::<f64>()
        / batch.len() as f64
}

/// Mean over sequences of the per-token negative log-likelihood `-(1/T) sum log p_t`.
pub fn sft_loss(batch: &[Vec<f64>]) -> Result<f64, KtoError> {
    if batch.is_empty() {
        return Err(KtoError::EmptyBatch);
    }
    let mut total = 0.0;
    for (s, probs) in batch.iter().enumerate() {
        if probs.is_empty() {
            return Err(KtoError::EmptySequence(s));
        }
        let mut nll = 0.0;
        for (t, &p) in probs.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(KtoError::InvalidProbability {
                    sequence: s,
                    token: t,
                    value: p,
                });
            }
            nll -= p.ln();
        }
        total += nll / probs.len() as f64;
    }
    Ok(total / batch.len() as f64)
}

/// Reference point, loss and per-example gradients of one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtoReport {
    pub z0: f64,
    pub loss: f64,
    pub grads: Vec<f64>,
}

/// Estimates `z0` (unless given) and evaluates loss and gradients.
pub fn evaluate_batch(
    batch: &[KtoExample],
    cfg: &KtoConfig,
    z0: Option<f64>,
) -> Result<KtoReport, KtoError> {
    let z0 = match z0 {
        Some(z) => z,
        None => estimate_z0(batch)?,
    };
    Ok(KtoReport {
        z0,
        loss: kto_loss(batch, z0, cfg)?,
        grads: kto_grad(batch, z0, cfg)?,
    })
}
