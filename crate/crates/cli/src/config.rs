//! Run configuration: one JSON document merged over defaults, then
//! `path.to.key=value` overrides. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tailsched::sched::ScoreConfig;
use tailsched::sim::{config_digest, EngineConfig, MetricsConfig, PredictorConfig};
use tailsched::workload::{PromptSynthSpec, WorkloadSpec};

use crate::CliError;

/// Synthetic request stream; the seed comes from [`RunConfig::seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    pub n_requests: usize,
    pub rps: f64,
    pub mu_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub nu: f64,
    pub max_tokens: u32,
    pub prompt_tokens_range: (u32, u32),
    /// Replay a JSON-lines trace instead of generating requests.
    pub trace: Option<PathBuf>,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        let w = WorkloadSpec::default();
        Self {
            n_requests: w.n_requests,
            rps: w.rps,
            mu_range: w.mu_range,
            sigma_range: w.sigma_range,
            nu: w.nu,
            max_tokens: w.max_tokens,
            prompt_tokens_range: w.prompt_tokens_range,
            trace: None,
        }
    }
}

impl WorkloadSection {
    pub fn spec(&self, seed: u64) -> WorkloadSpec {
        WorkloadSpec {
            n_requests: self.n_requests,
            rps: self.rps,
            mu_range: self.mu_range,
            sigma_range: self.sigma_range,
            nu: self.nu,
            max_tokens: self.max_tokens,
            prompt_tokens_range: self.prompt_tokens_range,
            seed,
        }
    }
}

/// Per-prompt synthetic data for `nu-sweep` and `repeat-sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    pub n_prompts: usize,
    pub draws_per_prompt: usize,
    pub mu_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub nu: f64,
}

impl Default for PromptSection {
    fn default() -> Self {
        let p = PromptSynthSpec::default();
        Self {
            n_prompts: p.n_prompts,
            draws_per_prompt: p.draws_per_prompt,
            mu_range: p.mu_range,
            sigma_range: p.sigma_range,
            nu: p.nu,
        }
    }
}

impl PromptSection {
    pub fn spec(&self, seed: u64) -> PromptSynthSpec {
        PromptSynthSpec {
            n_prompts: self.n_prompts,
            draws_per_prompt: self.draws_per_prompt,
            mu_range: self.mu_range,
            sigma_range: self.sigma_range,
            nu: self.nu,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Workload seeds are `seed, seed + 1, …` for multi-seed experiments.
    pub n_seeds: u64,
    pub rps_sweep: Vec<f64>,
    pub ablate_fixed_betas: Vec<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { n_seeds: 10, rps_sweep: vec![10.0, 30.0, 50.0, 100.0], ablate_fixed_betas: vec![0.1, 0.3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workload: WorkloadSection,
    pub prompts: PromptSection,
    pub engine: EngineConfig,
    pub score: ScoreConfig,
    pub predictor: PredictorConfig,
    pub metrics: MetricsConfig,
    pub experiments: ExperimentSection,
}

impl RunConfig {
    pub fn digest(&self) -> String {
        config_digest(self)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.experiments.n_seeds).map(|k| self.seed.wrapping_add(k)).collect()
    }
}

/// Objects merge key by key. An object whose `kind` tag differs from the
/// base replaces it whole, so enum variants never mix fields.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let switches_kind = matches!((b.get("kind"), p.get("kind")), (Some(x), Some(y)) if x != y);
            if switches_kind {
                *b = p;
                return;
            }
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Parses `a.b.c=value`; the value is JSON when it parses as JSON, else a string.
fn set_path(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override path `{path}`")));
    }
    let mut patch = value;
    for k in keys.iter().rev() {
        let mut m = Map::new();
        m.insert(k.to_string(), patch);
        patch = Value::Object(m);
    }
    merge(root, patch);
    Ok(())
}

pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut root = serde_json::to_value(RunConfig::default()).expect("default config serializes");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), e.line())))?;
        if !patch.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        merge(&mut root, patch);
    }
    for o in overrides {
        set_path(&mut root, o)?;
    }
    serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tailsched::sched::BetaPolicy;

    #[test]
    fn defaults_round_trip() {
        assert_eq!(resolve(None, &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn dotted_overrides() {
        let c = resolve(None, &["engine.batch_capacity=4".into(), "workload.rps=12.5".into()]).unwrap();
        assert_eq!(c.engine.batch_capacity, 4);
        assert_eq!(c.workload.rps, 12.5);
    }

    #[test]
    fn variant_switch_replaces_whole_object() {
        let c = resolve(None, &[r#"score.beta_policy={"kind":"fixed","beta":0.3}"#.into()]).unwrap();
        assert_eq!(c.score.beta_policy, BetaPolicy::Fixed { beta: 0.3 });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(resolve(None, &["engine.slots=4".into()]), Err(CliError::Config(_))));
        assert!(matches!(resolve(None, &["nonsense".into()]), Err(CliError::Config(_))));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_eq!(a.digest(), RunConfig::default().digest());
        assert_ne!(a.digest(), b.digest());
    }
}
