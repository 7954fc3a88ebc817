//! Output-length predictors and the batched prediction pipeline.
//!
//! The predictors stand in for a learned model that maps a prompt to the
//! `(μ, σ)` of its log-t length distribution: [`oracle_predict`] returns
//! the generating parameters, [`noisy_predict`] perturbs them in
//! `(μ, ln(1 + σ))` space. [`batch_schedule`] models the background
//! prediction thread that collects requests until a timeout or a size cap.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{censored_expectation, CensoredLogT, LogTParams, McContext};
use crate::rng;
use crate::workload::Request;

pub const SIGMA_HAT_FLOOR: f64 = 1e-6;
/// Keeps `σ̂` finite under extreme upward noise.
pub const SIGMA_HAT_CEIL: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum PredictorError {
    #[error("request {0} carries no true distribution parameters")]
    MissingParams(u64),
    #[error("invalid predictor configuration: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
}

/// Predicted log-space location and scale of a request's output length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedDist {
    pub mu_hat: f64,
    pub sigma_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub mu_noise_sd: f64,
    pub sigma_tilde_noise_sd: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), PredictorError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.mu_noise_sd) && ok(self.sigma_tilde_noise_sd) {
            Ok(())
        } else {
            Err(PredictorError::Config("noise standard deviations must be finite and ≥ 0".into()))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mu_noise_sd == 0.0 && self.sigma_tilde_noise_sd == 0.0
    }
}

pub fn oracle_predict(req: &Request) -> Result<PredictedDist, PredictorError> {
    match (req.true_mu, req.true_sigma) {
        (Some(mu_hat), Some(sigma_hat)) => Ok(PredictedDist { mu_hat, sigma_hat }),
        _ => Err(PredictorError::MissingParams(req.id)),
    }
}

/// Oracle parameters plus Gaussian noise on `μ` and on `σ̃ = ln(1 + σ)`.
/// The noise draw depends only on `(noise.seed, req.id)`.
pub fn noisy_predict(req: &Request, noise: &NoiseSpec) -> Result<PredictedDist, PredictorError> {
    let truth = oracle_predict(req)?;
    noise.validate()?;
    if noise.is_zero() {
        return Ok(truth);
    }
    let mut rng = rng::seeded(rng::derive_seed(noise.seed, req.id));
    let z_mu: f64 = StandardNormal.sample(&mut rng);
    let z_sigma: f64 = StandardNormal.sample(&mut rng);
    let mu_hat = truth.mu_hat + noise.mu_noise_sd * z_mu;
    let sigma_hat = if noise.sigma_tilde_noise_sd == 0.0 {
        truth.sigma_hat
    } else {
        let tilde = truth.sigma_hat.ln_1p() + noise.sigma_tilde_noise_sd * z_sigma;
        tilde.exp_m1().clamp(SIGMA_HAT_FLOOR, SIGMA_HAT_CEIL)
    };
    Ok(PredictedDist { mu_hat, sigma_hat })
}

/// Single-number length estimate: the censored expectation of the noisy
/// prediction at the request's `max_tokens`.
pub fn point_predict(req: &Request, noise: &NoiseSpec, mc: &McContext) -> Result<f64, PredictorError> {
    let pd = noisy_predict(req, noise)?;
    let nu = mc.nu().ok_or_else(|| PredictorError::Usage("point prediction needs a Student-t context".into()))?;
    let params = LogTParams::new(pd.mu_hat, pd.sigma_hat, nu).map_err(|e| PredictorError::Usage(e.to_string()))?;
    let cl = CensoredLogT::new(params, req.max_tokens as f64).map_err(|e| PredictorError::Usage(e.to_string()))?;
    censored_expectation(&cl, mc).map_err(|e| PredictorError::Usage(e.to_string()))
}

/// Which predictor produces `(μ̂, σ̂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorKind {
    Oracle,
    Noisy(NoiseSpec),
}

impl PredictorKind {
    pub fn predict(&self, req: &Request) -> Result<PredictedDist, PredictorError> {
        match self {
            PredictorKind::Oracle => oracle_predict(req),
            PredictorKind::Noisy(n) => noisy_predict(req, n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatcherConfig {
    /// Longest time the oldest queued submission waits before dispatch.
    pub timeout_s: f64,
    pub max_batch: usize,
    pub latency_base_s: f64,
    pub latency_per_item_s: f64,
}

impl Default for BatcherConfig {
    fn default() -> Self {
        Self { timeout_s: 0.003, max_batch: 32, latency_base_s: 0.002, latency_per_item_s: 0.0001 }
    }
}

impl BatcherConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(PredictorError::Config("timeout_s must be > 0".into()));
        }
        if self.max_batch < 1 {
            return Err(PredictorError::Config("max_batch must be ≥ 1".into()));
        }
        if !(self.latency_base_s >= 0.0 && self.latency_per_item_s >= 0.0) {
            return Err(PredictorError::Config("prediction latencies must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn latency(&self, batch_size: usize) -> f64 {
        self.latency_base_s + batch_size as f64 * self.latency_per_item_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBatch {
    pub ids: Vec<u64>,
    /// When the batch was handed to the predictor (full or timed out).
    pub dispatch_s: f64,
    /// When the predictor started on it; later than dispatch if the
    /// previous batch was still running.
    pub start_s: f64,
    pub ready_s: f64,
}

/// Greedy dynamic batching over submissions sorted by time.
///
/// A batch opens at its first submission and dispatches as soon as it
/// holds `max_batch` items or its oldest member has waited `timeout_s`.
/// One predictor processes batches in dispatch order.
pub fn plan_batches(submissions: &[(u64, f64)], cfg: &BatcherConfig) -> Result<Vec<PredictionBatch>, PredictorError> {
    cfg.validate()?;
    if submissions.windows(2).any(|w| w[1].1 < w[0].1) {
        return Err(PredictorError::Usage("submissions must be sorted by submit time".into()));
    }
    let mut batches = Vec::new();
    let mut predictor_free = f64::NEG_INFINITY;
    let mut i = 0;
    while i < submissions.len() {
        let deadline = submissions[i].1 + cfg.timeout_s;
        let mut j = i;
        while j < submissions.len() && j - i < cfg.max_batch && submissions[j].1 <= deadline {
            j += 1;
        }
        let size = j - i;
        let dispatch_s = if size == cfg.max_batch { submissions[j - 1].1 } else { deadline };
        let start_s = dispatch_s.max(predictor_free);
        let ready_s = start_s + cfg.latency(size);
        predictor_free = ready_s;
        batches.push(PredictionBatch {
            ids: submissions[i..j].iter().map(|s| s.0).collect(),
            dispatch_s,
            start_s,
            ready_s,
        });
        i = j;
    }
    Ok(batches)
}

/// `(req_id, prediction_ready_time)` for every submission, in submission order.
pub fn batch_schedule(submissions: &[(u64, f64)], cfg: &BatcherConfig) -> Result<Vec<(u64, f64)>, PredictorError> {
    Ok(plan_batches(submissions, cfg)?
        .into_iter()
        .flat_map(|b| {
            let ready = b.ready_s;
            b.ids.into_iter().map(move |id| (id, ready))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(id: u64) -> Request {
        Request {
            id,
            arrival_s: 0.0,
            prompt_tokens: 8,
            true_output_tokens: 50,
            max_tokens: 1000,
            true_mu: Some(4.0),
            true_sigma: Some(0.8),
        }
    }

    #[test]
    fn oracle_returns_truth() {
        assert_eq!(oracle_predict(&req(1)).unwrap(), PredictedDist { mu_hat: 4.0, sigma_hat: 0.8 });
        assert_eq!(oracle_predict(&req(1)), oracle_predict(&req(1)));
        let bare = Request { true_mu: None, ..req(2) };
        assert_eq!(oracle_predict(&bare), Err(PredictorError::MissingParams(2)));
        assert!(noisy_predict(&bare, &NoiseSpec::default()).is_err());
    }

    #[test]
    fn zero_noise_is_oracle() {
        let noise = NoiseSpec { seed: 3, ..Default::default() };
        for id in 0..20 {
            assert_eq!(noisy_predict(&req(id), &noise).unwrap(), oracle_predict(&req(id)).unwrap());
        }
    }

    #[test]
    fn sigma_floor_under_large_negative_noise() {
        let noise = NoiseSpec { mu_noise_sd: 0.0, sigma_tilde_noise_sd: 50.0, seed: 1 };
        for id in 0..200 {
            let p = noisy_predict(&req(id), &noise).unwrap();
            assert!((SIGMA_HAT_FLOOR..=SIGMA_HAT_CEIL).contains(&p.sigma_hat));
        }
    }

    #[test]
    fn noise_is_per_request_deterministic() {
        let noise = NoiseSpec { mu_noise_sd: 0.3, sigma_tilde_noise_sd: 0.2, seed: 9 };
        assert_eq!(noisy_predict(&req(5), &noise), noisy_predict(&req(5), &noise));
        assert_ne!(noisy_predict(&req(5), &noise), noisy_predict(&req(6), &noise));
    }

    #[test]
    fn point_prediction_near_deterministic() {
        let mc = McContext::with_defaults(3.5).unwrap();
        let r = Request { true_mu: Some(100f64.ln()), true_sigma: Some(1e-9), ..req(1) };
        let v = point_predict(&r, &NoiseSpec::default(), &mc).unwrap();
        assert!((v - 100.0).abs() < 1e-3);
    }

    #[test]
    fn point_prediction_is_capped() {
        let mc = McContext::with_defaults(3.5).unwrap();
        let noise = NoiseSpec { mu_noise_sd: 2.0, sigma_tilde_noise_sd: 0.5, seed: 4 };
        for id in 0..50 {
            let r = Request { max_tokens: 64, ..req(id) };
            assert!(point_predict(&r, &noise, &mc).unwrap() <= 64.0);
        }
    }

    #[test]
    fn full_batch_dispatches_immediately() {
        let cfg = BatcherConfig::default();
        let subs: Vec<(u64, f64)> = (0..32).map(|i| (i, 1.0)).collect();
        let b = plan_batches(&subs, &cfg).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].ids.len(), 32);
        assert_eq!(b[0].dispatch_s, 1.0);
        assert!((b[0].ready_s - (1.0 + 0.002 + 32.0 * 0.0001)).abs() < 1e-12);
    }

    #[test]
    fn lone_submission_waits_for_timeout() {
        let cfg = BatcherConfig::default();
        let b = plan_batches(&[(7, 2.0)], &cfg).unwrap();
        assert_eq!(b[0].dispatch_s, 2.0 + 0.003);
        assert!((b[0].ready_s - (2.003 + 0.002 + 0.0001)).abs() < 1e-12);
    }

    #[test]
    fn thirty_three_split_32_plus_1() {
        let cfg = BatcherConfig::default();
        let subs: Vec<(u64, f64)> = (0..33).map(|i| (i, 0.5)).collect();
        let b = plan_batches(&subs, &cfg).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].ids.len(), 32);
        assert_eq!(b[0].dispatch_s, 0.5);
        assert_eq!(b[1].ids, vec![32]);
        assert_eq!(b[1].dispatch_s, 0.5 + 0.003);
        // second batch queues behind the first on the single predictor
        assert_eq!(b[1].start_s, b[0].ready_s.max(b[1].dispatch_s));
    }

    #[test]
    fn unsorted_submissions_rejected() {
        let cfg = BatcherConfig::default();
        assert!(matches!(batch_schedule(&[(0, 1.0), (1, 0.5)], &cfg), Err(PredictorError::Usage(_))));
        let bad = BatcherConfig { max_batch: 0, ..cfg };
        assert!(batch_schedule(&[], &bad).is_err());
    }
}
