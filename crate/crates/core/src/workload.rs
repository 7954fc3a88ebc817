//! Synthetic workloads and trace files.
//!
//! Two generators live here. [`gen_termination_mixture`] draws per-trajectory
//! termination rates `p ~ Beta(α, 1)` (density `α p^{α−1}` on (0, 1)) and
//! geometric lengths given `p`; the mixture has a power-law tail
//! `P(L > n) ≈ α Γ(α) n^{−α}`. [`gen_logt_workload`] builds serving
//! requests whose output lengths come from per-prompt log-t distributions,
//! with Poisson arrivals.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{self, LogTParams};
use crate::fit::io::PromptSamples;
use crate::rng;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload configuration: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid trace: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One inference request. On the wire the realized length and the
/// distribution parameters are named `output_tokens`, `mu` and `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub arrival_s: f64,
    pub prompt_tokens: u32,
    /// Realized generation length before the `max_tokens` cap.
    #[serde(rename = "output_tokens")]
    pub true_output_tokens: u32,
    pub max_tokens: u32,
    #[serde(rename = "mu", default, skip_serializing_if = "Option::is_none")]
    pub true_mu: Option<f64>,
    #[serde(rename = "sigma", default, skip_serializing_if = "Option::is_none")]
    pub true_sigma: Option<f64>,
}

impl Request {
    /// Tokens the engine actually emits.
    pub fn emitted_tokens(&self) -> u32 {
        self.true_output_tokens.min(self.max_tokens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailLawSpec {
    pub alpha: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub rate: f64,
    pub length: u64,
}

/// `L ~ Geometric(p)` on {1, 2, …} by inversion.
fn geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let v = 1.0 - rng.random::<f64>(); // (0, 1]
    let l = 1.0 + (v.ln() / (-p).ln_1p()).floor();
    // saturating float → int cast
    l as u64
}

/// Termination rates and lengths of `spec.n` independent trajectories.
pub fn gen_trajectories(spec: &TailLawSpec) -> Result<Vec<Trajectory>, WorkloadError> {
    if !(spec.alpha.is_finite() && spec.alpha > 0.0) {
        return Err(WorkloadError::Config(format!("alpha must be finite and > 0, got {}", spec.alpha)));
    }
    let mut rng = rng::seeded(spec.seed);
    let inv_alpha = 1.0 / spec.alpha;
    Ok((0..spec.n)
        .map(|_| {
            let u = 1.0 - rng.random::<f64>();
            let rate = u.powf(inv_alpha);
            Trajectory { rate, length: geometric(rate, &mut rng) }
        })
        .collect())
}

/// Lengths of the termination-rate mixture.
pub fn gen_termination_mixture(spec: &TailLawSpec) -> Result<Vec<u64>, WorkloadError> {
    Ok(gen_trajectories(spec)?.into_iter().map(|t| t.length).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub n_requests: usize,
    /// Mean arrival rate (requests per second).
    pub rps: f64,
    pub mu_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub nu: f64,
    pub max_tokens: u32,
    pub prompt_tokens_range: (u32, u32),
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            n_requests: 1000,
            rps: 100.0,
            mu_range: (3.0, 5.0),
            sigma_range: (0.5, 1.2),
            nu: 3.5,
            max_tokens: 2048,
            prompt_tokens_range: (16, 512),
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::Config(m.to_string()));
        if !(self.rps.is_finite() && self.rps > 0.0) {
            return bad("rps must be finite and > 0");
        }
        if !(self.mu_range.0 <= self.mu_range.1) || !self.mu_range.0.is_finite() || !self.mu_range.1.is_finite() {
            return bad("mu_range must be finite and ordered");
        }
        if !(self.sigma_range.0 > 0.0 && self.sigma_range.0 <= self.sigma_range.1 && self.sigma_range.1.is_finite()) {
            return bad("sigma_range must be positive and ordered");
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return bad("nu must be finite and > 0");
        }
        if self.max_tokens < 1 {
            return bad("max_tokens must be ≥ 1");
        }
        if !(self.prompt_tokens_range.0 >= 1 && self.prompt_tokens_range.0 <= self.prompt_tokens_range.1) {
            return bad("prompt_tokens_range must be ≥ 1 and ordered");
        }
        Ok(())
    }
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Token count from a continuous length: round, then clamp into `[1, u32::MAX]`.
pub fn round_length(x: f64) -> u32 {
    x.round().clamp(1.0, u32::MAX as f64) as u32
}

/// Requests with per-prompt log-t output lengths and Poisson arrivals.
pub fn gen_logt_workload(spec: &WorkloadSpec) -> Result<Vec<Request>, WorkloadError> {
    spec.validate()?;
    let arrivals = poisson_arrivals(spec.rps, spec.n_requests, rng::derive_seed(spec.seed, 0))?;
    let mut rng = rng::seeded(rng::derive_seed(spec.seed, 1));
    let mut out = Vec::with_capacity(spec.n_requests);
    for (i, arrival_s) in arrivals.into_iter().enumerate() {
        let mu = uniform_in(&mut rng, spec.mu_range);
        let sigma = uniform_in(&mut rng, spec.sigma_range);
        let params = LogTParams::new(mu, sigma, spec.nu).map_err(|e| WorkloadError::Config(e.to_string()))?;
        let length = dist::draw_logt(&params, &mut rng);
        let (plo, phi) = spec.prompt_tokens_range;
        let prompt_tokens = rng.random_range(plo..=phi);
        out.push(Request {
            id: i as u64,
            arrival_s,
            prompt_tokens,
            true_output_tokens: round_length(length),
            max_tokens: spec.max_tokens,
            true_mu: Some(mu),
            true_sigma: Some(sigma),
        });
    }
    Ok(out)
}

/// Per-prompt repeated generations drawn from log-t truths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSynthSpec {
    pub n_prompts: usize,
    pub draws_per_prompt: usize,
    pub mu_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub nu: f64,
    pub seed: u64,
}

impl Default for PromptSynthSpec {
    fn default() -> Self {
        Self { n_prompts: 200, draws_per_prompt: 100, mu_range: (3.0, 6.0), sigma_range: (0.3, 1.0), nu: 3.5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPrompt {
    pub mu: f64,
    pub sigma: f64,
    pub samples: PromptSamples,
}

/// Continuous (unrounded) draws; prompt `i` depends only on `(seed, i)`.
pub fn gen_prompt_samples(spec: &PromptSynthSpec) -> Result<Vec<SyntheticPrompt>, WorkloadError> {
    let probe = WorkloadSpec { mu_range: spec.mu_range, sigma_range: spec.sigma_range, nu: spec.nu, ..Default::default() };
    probe.validate()?;
    (0..spec.n_prompts)
        .map(|i| {
            let mut rng = rng::seeded(rng::derive_seed(spec.seed, i as u64));
            let mu = uniform_in(&mut rng, spec.mu_range);
            let sigma = uniform_in(&mut rng, spec.sigma_range);
            let params = LogTParams::new(mu, sigma, spec.nu).map_err(|e| WorkloadError::Config(e.to_string()))?;
            let lengths = (0..spec.draws_per_prompt).map(|_| dist::draw_logt(&params, &mut rng)).collect();
            Ok(SyntheticPrompt { mu, sigma, samples: PromptSamples { prompt_id: format!("p{i}"), lengths } })
        })
        .collect()
}

/// Arrival times of a Poisson process with rate `rps`, starting after 0.
pub fn poisson_arrivals(rps: f64, n: usize, seed: u64) -> Result<Vec<f64>, WorkloadError> {
    if !(rps.is_finite() && rps > 0.0) {
        return Err(WorkloadError::Config(format!("rps must be finite and > 0, got {rps}")));
    }
    let gap = Exp::new(rps).map_err(|e| WorkloadError::Config(e.to_string()))?;
    let mut rng = rng::seeded(seed);
    let mut t = 0.0;
    Ok((0..n)
        .map(|_| {
            t += gap.sample(&mut rng);
            t
        })
        .collect())
}

/// Wire form of a trace line; `arrival_s` may be omitted.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceRecord {
    id: u64,
    arrival_s: Option<f64>,
    prompt_tokens: u32,
    output_tokens: u32,
    max_tokens: u32,
    mu: Option<f64>,
    sigma: Option<f64>,
}

/// Parses a JSON-lines trace. Records without `arrival_s` receive Poisson
/// arrivals at `fill_rps` (in file order, seeded by `seed`); the result is
/// sorted by arrival, ties kept in file order.
pub fn parse_trace(text: &str, fill_rps: Option<f64>, seed: u64) -> Result<Vec<Request>, WorkloadError> {
    let mut reqs = Vec::new();
    let mut missing = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord =
            serde_json::from_str(line).map_err(|e| WorkloadError::Parse { line: line_no, msg: e.to_string() })?;
        let invalid = |field: &str| WorkloadError::Parse { line: line_no, msg: format!("field `{field}` must be ≥ 1") };
        if rec.prompt_tokens < 1 {
            return Err(invalid("prompt_tokens"));
        }
        if rec.output_tokens < 1 {
            return Err(invalid("output_tokens"));
        }
        if rec.max_tokens < 1 {
            return Err(invalid("max_tokens"));
        }
        if let Some(a) = rec.arrival_s {
            if !(a.is_finite() && a >= 0.0) {
                return Err(WorkloadError::Parse { line: line_no, msg: "field `arrival_s` must be ≥ 0".into() });
            }
        }
        if !seen.insert(rec.id) {
            return Err(WorkloadError::Validation(format!("duplicate id {} on line {line_no}", rec.id)));
        }
        if rec.arrival_s.is_none() {
            missing.push(reqs.len());
        }
        reqs.push(Request {
            id: rec.id,
            arrival_s: rec.arrival_s.unwrap_or(0.0),
            prompt_tokens: rec.prompt_tokens,
            true_output_tokens: rec.output_tokens,
            max_tokens: rec.max_tokens,
            true_mu: rec.mu,
            true_sigma: rec.sigma,
        });
    }
    if !missing.is_empty() {
        let rps = fill_rps.ok_or_else(|| {
            WorkloadError::Validation(format!("{} records lack arrival_s and no fill rate was given", missing.len()))
        })?;
        let times = poisson_arrivals(rps, missing.len(), seed)?;
        for (idx, t) in missing.into_iter().zip(times) {
            reqs[idx].arrival_s = t;
        }
    }
    reqs.sort_by(|a, b| a.arrival_s.total_cmp(&b.arrival_s));
    Ok(reqs)
}

pub fn load_trace(path: &Path, fill_rps: Option<f64>, seed: u64) -> Result<Vec<Request>, WorkloadError> {
    parse_trace(&fs::read_to_string(path)?, fill_rps, seed)
}

pub fn trace_to_string(requests: &[Request]) -> String {
    let mut s = String::new();
    for r in requests {
        s.push_str(&serde_json::to_string(r).expect("request serializes"));
        s.push('\n');
    }
    s
}

pub fn save_trace(requests: &[Request], path: &Path) -> Result<(), WorkloadError> {
    let mut f = fs::File::create(path)?;
    f.write_all(trace_to_string(requests).as_bytes())?;
    Ok(())
}
