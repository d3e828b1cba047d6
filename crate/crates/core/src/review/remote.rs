//! Client for OpenAI-compatible chat-completion endpoints.

use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::Duration;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::generator::{Generation, Generator, GeneratorError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Base URL; requests go to `{endpoint}/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding a bearer token, if any.
    pub token_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry delay; each further retry doubles it.
    pub backoff_ms: u64,
    /// Upper bound on requests in flight across all clients in the process.
    pub max_concurrency: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8000/v1".into(),
            model: "cad-generator".into(),
            token_env: None,
            timeout_secs: 60.0,
            max_retries: 3,
            backoff_ms: 500,
            max_concurrency: 4,
        }
    }
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(GeneratorError::InvalidConfig(format!(
                "timeout must be > 0, got {}",
                self.timeout_secs
            )));
        }
        if self.endpoint.is_empty() {
            return Err(GeneratorError::InvalidConfig("endpoint is empty".into()));
        }
        if self.max_concurrency == 0 {
            return Err(GeneratorError::InvalidConfig(
                "max_concurrency must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Counting semaphore shared by every remote client.
struct Permits {
    state: Mutex<usize>,
    freed: Condvar,
}

fn permits() -> &'static Arc<Permits> {
    static PERMITS: OnceLock<Arc<Permits>> = OnceLock::new();
    PERMITS.get_or_init(|| {
        Arc::new(Permits {
            state: Mutex::new(0),
            freed: Condvar::new(),
        })
    })
}

struct Permit<'a>(&'a Permits);

impl<'a> Permit<'a> {
    fn acquire(p: &'a Permits, limit: usize) -> Self {
        let mut in_flight = p.state.lock().unwrap_or_else(|e| e.into_inner());
        while *in_flight >= limit {
            in_flight = p.freed.wait(in_flight).unwrap_or_else(|e| e.into_inner());
        }
        *in_flight += 1;
        Permit(p)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut in_flight = self.0.state.lock().unwrap_or_else(|e| e.into_inner());
        *in_flight -= 1;
        self.0.freed.notify_one();
    }
}

enum Failure {
    Transient(String),
    Fatal(GeneratorError),
}

pub struct RemoteGenerator {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    token: Option<String>,
}

impl RemoteGenerator {
    pub fn new(cfg: RemoteConfig) -> Result<Self, GeneratorError> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let token = cfg
            .token_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        Ok(RemoteGenerator { cfg, agent, token })
    }

    fn url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.cfg.endpoint.trim_end_matches('/')
        )
    }

    fn request_once(&self, body: &str) -> Result<String, Failure> {
        let _permit = Permit::acquire(permits(), self.cfg.max_concurrency);
        let mut req = self
            .agent
            .post(self.url())
            .header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req
            .send(body)
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        debug!("response {status}: {text}");
        match status {
            200..=299 => extract_completion(&text).map_err(Failure::Fatal),
            429 | 500..=599 => Err(Failure::Transient(format!("HTTP {status}"))),
            _ => Err(Failure::Fatal(GeneratorError::Unavailable {
                attempts: 1,
                detail: format!("HTTP {status}: {text}"),
            })),
        }
    }
}

/// `choices[0].message.content` of a chat-completion response body.
pub fn extract_completion(body: &str) -> Result<String, GeneratorError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| GeneratorError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| {
            GeneratorError::MalformedResponse("missing choices[0].message.content".into())
        })
}

impl Generator for RemoteGenerator {
    /// Retries transport errors, HTTP 429 and 5xx with exponential backoff;
    /// gives up after `max_retries` retries.
    fn generate(&mut self, prompt: &str) -> Result<Generation, GeneratorError> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
        })
        .to_string();
        debug!("request to {}: {body}", self.url());
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                let delay = self
                    .cfg
                    .backoff_ms
                    .saturating_mul(1u64 << (attempt - 1).min(20));
                info!(
                    "retry {attempt}/{} in {delay} ms after: {last}",
                    self.cfg.max_retries
                );
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.request_once(&body) {
                Ok(text) => {
                    return Ok(Generation {
                        text,
                        retries: attempt,
                    })
                }
                Err(Failure::Fatal(GeneratorError::Unavailable { detail, .. })) => {
                    return Err(GeneratorError::Unavailable {
                        attempts: attempt + 1,
                        detail,
                    })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(msg)) => {
                    warn!("generator request failed: {msg}");
                    last = msg;
                }
            }
        }
        Err(GeneratorError::Unavailable {
            attempts: self.cfg.max_retries + 1,
            detail: last,
        })
    }
}
