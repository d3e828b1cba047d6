//! Run configuration resolved from flags, a TOML file, `CADREWARD_*`
//! environment variables and defaults, in that order of precedence.

use std::path::Path;

use cadreward::judge::CjmConfig;
use cadreward::kto::KtoConfig;
use cadreward::review::{GeneratorBinding, LoopConfig, RemoteConfig};
use cadreward::KernelConfig;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const ENV_PREFIX: &str = "CADREWARD_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    StubDeterministic,
    StubStochastic,
    Remote,
}

/// Every tunable of every command, flat so that file keys, environment
/// variables and flags share one naming scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub cd_threshold: f64,
    pub alpha: f64,
    pub n_points: usize,
    pub arc_segments: usize,
    pub closure_epsilon: f64,
    pub area_epsilon: f64,
    pub boundary_epsilon: f64,
    pub empty_probes: usize,
    pub max_edge: f64,
    pub tol_levels: u8,
    pub max_iters: usize,
    pub generator: GeneratorKind,
    pub fail_first_k: usize,
    pub fail_prob: f64,
    pub endpoint: String,
    pub model: String,
    pub token_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub max_concurrency: usize,
    pub beta: f64,
    pub lambda_d: f64,
    pub lambda_u: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cjm = CjmConfig::default();
        let k = cjm.kernel;
        let remote = RemoteConfig::default();
        let kto = KtoConfig::default();
        RunConfig {
            seed: cjm.seed,
            cd_threshold: cjm.cd_threshold,
            alpha: cjm.alpha,
            n_points: cjm.n_points,
            arc_segments: k.arc_segments,
            closure_epsilon: k.closure_epsilon,
            area_epsilon: k.area_epsilon,
            boundary_epsilon: k.boundary_epsilon,
            empty_probes: k.empty_probes,
            max_edge: k.max_edge,
            tol_levels: cadreward::metrics::DEFAULT_TOL_LEVELS,
            max_iters: LoopConfig::default().max_iters,
            generator: GeneratorKind::StubDeterministic,
            fail_first_k: 0,
            fail_prob: 0.0,
            endpoint: remote.endpoint,
            model: remote.model,
            token_env: remote.token_env,
            timeout_secs: remote.timeout_secs,
            max_retries: remote.max_retries,
            backoff_ms: remote.backoff_ms,
            max_concurrency: remote.max_concurrency,
            beta: kto.beta,
            lambda_d: kto.lambda_d,
            lambda_u: kto.lambda_u,
        }
    }
}

/// Command-line overrides; unset flags fall through to lower layers.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Overrides {
    /// Seed for every random choice (point sampling, dataset subsampling, stub generators).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Chamfer distance below which a prediction is desirable.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cd_threshold: Option<f64>,
    /// Probability of keeping a desirable sample in binary datasets.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Points sampled per model for Chamfer distance.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    /// Polyline segments per full circle when tessellating arcs.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc_segments: Option<usize>,
    /// Largest gap between loop endpoints that still counts as closed.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure_epsilon: Option<f64>,
    /// Smallest profile area accepted.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area_epsilon: Option<f64>,
    /// Distance below which a point counts as on the surface.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_epsilon: Option<f64>,
    /// Grid probes used to detect an empty solid.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empty_probes: Option<usize>,
    /// Target longest edge when refining faces near other bodies.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_edge: Option<f64>,
    /// Per-parameter tolerance (quantization levels) when matching primitives.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_levels: Option<u8>,
    /// Review-and-regenerate rounds after the first generation.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    /// Sequence generator used by `review`.
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorKind>,
    /// Deterministic stub: number of invalid outputs before a valid one.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fail_first_k: Option<usize>,
    /// Stochastic stub: probability of an invalid output.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fail_prob: Option<f64>,
    /// Base URL of an OpenAI-compatible API.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Model name sent to the remote API.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Environment variable that holds the bearer token.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_env: Option<String>,
    /// Per-request timeout for the remote API.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<f64>,
    /// Retries after a transport error, 429 or 5xx.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    /// Initial retry backoff; doubles on each retry.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backoff_ms: Option<u64>,
    /// Upper bound on parallel remote requests.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_concurrency: Option<usize>,
    /// KTO temperature.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// KTO weight of desirable samples.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_d: Option<f64>,
    /// KTO weight of undesirable samples.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_u: Option<f64>,
}

/// Reads a scalar from its environment spelling, using the default's JSON type.
fn env_value(raw: &str, like: &Value) -> Result<Value, String> {
    match like {
        Value::Number(n) if n.is_u64() => raw
            .trim()
            .parse::<u64>()
            .map(Value::from)
            .map_err(|e| e.to_string()),
        Value::Number(_) => raw
            .trim()
            .parse::<f64>()
            .map(Value::from)
            .map_err(|e| e.to_string()),
        Value::Bool(_) => raw
            .trim()
            .parse::<bool>()
            .map(Value::from)
            .map_err(|e| e.to_string()),
        _ => Ok(Value::String(raw.to_string())),
    }
}

impl RunConfig {
    /// Resolves the layers. `env` is a lookup so tests need not touch the process environment.
    pub fn resolve(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        flags: &Overrides,
    ) -> Result<RunConfig, String> {
        let Value::Object(mut merged) =
            serde_json::to_value(RunConfig::default()).map_err(|e| e.to_string())?
        else {
            unreachable!("config serializes to an object")
        };
        let keys: Vec<String> = merged.keys().cloned().collect();
        for key in keys {
            let var = format!("{ENV_PREFIX}{}", key.to_uppercase());
            if let Some(raw) = env(&var) {
                let v = env_value(&raw, &merged[&key]).map_err(|e| format!("{var}: {e}"))?;
                merged.insert(key, v);
            }
        }
        if let Some(path) = file {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            let Value::Object(from_file) =
                serde_json::to_value(table).map_err(|e| e.to_string())?
            else {
                unreachable!("a table serializes to an object")
            };
            merge(&mut merged, from_file);
        }
        if let Value::Object(from_flags) = serde_json::to_value(flags).map_err(|e| e.to_string())? {
            merge(&mut merged, from_flags);
        }
        let cfg: RunConfig =
            serde_json::from_value(Value::Object(merged)).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        self.cjm().validate().map_err(|e| e.to_string())?;
        self.kto().validate().map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&self.fail_prob) {
            return Err(format!(
                "fail_prob must be in [0, 1], got {}",
                self.fail_prob
            ));
        }
        if self.generator == GeneratorKind::Remote {
            self.remote().validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    pub fn kernel(&self) -> KernelConfig {
        KernelConfig {
            arc_segments: self.arc_segments,
            closure_epsilon: self.closure_epsilon,
            area_epsilon: self.area_epsilon,
            boundary_epsilon: self.boundary_epsilon,
            empty_probes: self.empty_probes,
            max_edge: self.max_edge,
        }
    }

    pub fn cjm(&self) -> CjmConfig {
        CjmConfig {
            cd_threshold: self.cd_threshold,
            alpha: self.alpha,
            n_points: self.n_points,
            seed: self.seed,
            kernel: self.kernel(),
        }
    }

    pub fn kto(&self) -> KtoConfig {
        KtoConfig {
            beta: self.beta,
            lambda_d: self.lambda_d,
            lambda_u: self.lambda_u,
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            max_iters: self.max_iters,
            seed: self.seed,
        }
    }

    pub fn remote(&self) -> RemoteConfig {
        RemoteConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            token_env: self.token_env.clone(),
            timeout_secs: self.timeout_secs,
            max_retries: self.max_retries,
            backoff_ms: self.backoff_ms,
            max_concurrency: self.max_concurrency,
        }
    }

    pub fn binding(&self) -> GeneratorBinding {
        match self.generator {
            GeneratorKind::StubDeterministic => GeneratorBinding::StubDeterministic {
                fail_first_k: self.fail_first_k,
            },
            GeneratorKind::StubStochastic => GeneratorBinding::StubStochastic {
                fail_prob: self.fail_prob,
            },
            GeneratorKind::Remote => GeneratorBinding::Remote(self.remote()),
        }
    }
}

fn merge(into: &mut Map<String, Value>, from: Map<String, Value>) {
    for (k, v) in from {
        into.insert(k, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::resolve(None, env(&[]), &Overrides::default()).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.n_points, 2048);
        assert_eq!(cfg.max_iters, 1);
    }

    #[test]
    fn precedence_flags_file_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 5\nalpha = 0.25\n").unwrap();
        let e = env(&[
            ("CADREWARD_SEED", "9"),
            ("CADREWARD_ALPHA", "0.5"),
            ("CADREWARD_N_POINTS", "64"),
        ]);
        let flags = Overrides {
            seed: Some(1),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(Some(&path), e, &flags).unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.alpha, 0.25);
        assert_eq!(cfg.n_points, 64);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sed = 5\n").unwrap();
        assert!(RunConfig::resolve(Some(&path), env(&[]), &Overrides::default()).is_err());
        assert!(
            RunConfig::resolve(None, env(&[("CADREWARD_SEED", "x")]), &Overrides::default())
                .is_err()
        );
        let flags = Overrides {
            alpha: Some(2.0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(None, env(&[]), &flags).is_err());
    }

    #[test]
    fn generator_kind_from_env() {
        let cfg = RunConfig::resolve(
            None,
            env(&[("CADREWARD_GENERATOR", "stub-stochastic")]),
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(cfg.generator, GeneratorKind::StubStochastic);
    }
}
