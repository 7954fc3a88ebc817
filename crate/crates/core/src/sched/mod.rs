//! TIE scoring, the adaptive risk coefficient, and dispatch policies.
//!
//! A request's priority is `E[X̃] + β·CVaR_α(X̃)` of its predicted length
//! censored at `max_tokens`; smaller scores dispatch first. Until its
//! prediction lands a request is keyed by `max_tokens` and so sinks below
//! every predicted request with a smaller score.

mod queue;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{CensoredLogNormal, CensoredLogT, DistError, LogTParams, McContext};
use crate::predictor::PredictedDist;

pub use queue::{QueueEntry, WaitingQueue};

#[derive(Debug, Error, PartialEq)]
pub enum SchedError {
    #[error("invalid scheduler configuration: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("score invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaPolicy {
    Fixed { beta: f64 },
    /// `beta_max · min(1, queue_len / q_sat)`.
    AdaptiveLinear { beta_max: f64, q_sat: u64 },
}

impl Default for BetaPolicy {
    fn default() -> Self {
        BetaPolicy::AdaptiveLinear { beta_max: 0.5, q_sat: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub cvar_alpha: f64,
    pub beta_policy: BetaPolicy,
    pub rebuild_drift: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { cvar_alpha: 0.9, beta_policy: BetaPolicy::default(), rebuild_drift: 0.1 }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<(), SchedError> {
        if !(0.0..1.0).contains(&self.cvar_alpha) {
            return Err(SchedError::Config("cvar_alpha must lie in [0, 1)".into()));
        }
        match self.beta_policy {
            BetaPolicy::Fixed { beta } if !(beta.is_finite() && beta >= 0.0) => {
                return Err(SchedError::Config("beta must be ≥ 0".into()));
            }
            BetaPolicy::AdaptiveLinear { beta_max, q_sat } if !(beta_max.is_finite() && beta_max >= 0.0) || q_sat < 1 => {
                return Err(SchedError::Config("adaptive beta needs beta_max ≥ 0 and q_sat ≥ 1".into()));
            }
            _ => {}
        }
        if !(self.rebuild_drift.is_finite() && self.rebuild_drift > 0.0) {
            return Err(SchedError::Config("rebuild_drift must be > 0".into()));
        }
        Ok(())
    }
}

pub fn compute_beta(queue_len: usize, policy: &BetaPolicy) -> f64 {
    match *policy {
        BetaPolicy::Fixed { beta } => beta,
        BetaPolicy::AdaptiveLinear { beta_max, q_sat } => beta_max * (queue_len as f64 / q_sat as f64).min(1.0),
    }
}

pub fn compute_score(expectation: f64, cvar: f64, beta: f64) -> Result<f64, SchedError> {
    if !(expectation > 0.0 && expectation.is_finite()) {
        return Err(SchedError::Invariant(format!("expectation must be positive, got {expectation}")));
    }
    if cvar < expectation {
        return Err(SchedError::Invariant(format!("cvar {cvar} below expectation {expectation}")));
    }
    Ok(expectation + beta * cvar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Fcfs,
    Sept,
    Tie,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Fcfs, Policy::Sept, Policy::Tie];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Fcfs => "fcfs",
            Policy::Sept => "sept",
            Policy::Tie => "tie",
        }
    }

    /// β used when a prediction for a queue of `queue_len` waiting requests lands.
    pub fn beta(self, queue_len: usize, cfg: &ScoreConfig) -> f64 {
        match self {
            Policy::Tie => compute_beta(queue_len, &cfg.beta_policy),
            Policy::Fcfs | Policy::Sept => 0.0,
        }
    }

    pub fn uses_predictions(self) -> bool {
        self != Policy::Fcfs
    }
}

impl std::str::FromStr for Policy {
    type Err = SchedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SchedError::Config(format!("unknown policy `{s}`")))
    }
}

/// Next request to admit. TIE first re-keys the queue if β has drifted.
pub fn policy_next(policy: Policy, q: &mut WaitingQueue, cfg: &ScoreConfig) -> Option<QueueEntry> {
    if policy == Policy::Tie {
        let beta_now = compute_beta(q.len(), &cfg.beta_policy);
        q.rebuild_if_drifted(beta_now);
    }
    q.pop_min()
}

/// Distribution family used to turn `(μ̂, σ̂)` into `E[X̃]` and CVaR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringFamily {
    LogT,
    LogNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub family: ScoringFamily,
    pub nu: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            family: ScoringFamily::LogT,
            nu: 3.5,
            n_samples: crate::dist::DEFAULT_MC_SAMPLES,
            seed: crate::dist::DEFAULT_MC_SEED,
        }
    }
}

/// Computes `(E[X̃], CVaR_α(X̃))` against one shared sample set.
#[derive(Debug, Clone)]
pub struct Scorer {
    family: ScoringFamily,
    alpha: f64,
    mc: McContext,
}

impl Scorer {
    pub fn new(settings: &McSettings, alpha: f64) -> Result<Self, SchedError> {
        let mc = match settings.family {
            ScoringFamily::LogT => McContext::student_t(settings.nu, settings.n_samples, settings.seed)?,
            ScoringFamily::LogNormal => McContext::normal(settings.n_samples, settings.seed)?,
        };
        Ok(Self { family: settings.family, alpha, mc })
    }

    pub fn moments(&self, pd: &PredictedDist, max_tokens: u32) -> Result<(f64, f64), SchedError> {
        let x_max = f64::from(max_tokens);
        Ok(match self.family {
            ScoringFamily::LogT => {
                let nu = self.mc.nu().expect("student-t context");
                let cl = CensoredLogT::new(LogTParams::new(pd.mu_hat, pd.sigma_hat, nu)?, x_max)?;
                (cl.expectation(&self.mc)?, cl.cvar(self.alpha, &self.mc)?)
            }
            ScoringFamily::LogNormal => {
                let cl = CensoredLogNormal::new(pd.mu_hat, pd.sigma_hat, x_max)?;
                (cl.expectation(&self.mc)?, cl.cvar(self.alpha, &self.mc)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_laws() {
        assert_eq!(compute_beta(7, &BetaPolicy::Fixed { beta: 0.3 }), 0.3);
        let ad = BetaPolicy::AdaptiveLinear { beta_max: 0.5, q_sat: 128 };
        assert_eq!(compute_beta(0, &ad), 0.0);
        assert_eq!(compute_beta(64, &ad), 0.25);
        assert_eq!(compute_beta(1_000_000, &ad), 0.5);
    }

    #[test]
    fn score_arithmetic() {
        assert_eq!(compute_score(100.0, 400.0, 0.3).unwrap(), 220.0);
        assert_eq!(compute_score(100.0, 400.0, 0.0).unwrap(), 100.0);
        assert!(matches!(compute_score(100.0, 99.0, 0.3), Err(SchedError::Invariant(_))));
        assert!(compute_score(0.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ScoreConfig::default().validate().is_ok());
        assert!(ScoreConfig { cvar_alpha: 1.0, ..Default::default() }.validate().is_err());
        let bad = BetaPolicy::AdaptiveLinear { beta_max: 0.5, q_sat: 0 };
        assert!(ScoreConfig { beta_policy: bad, ..Default::default() }.validate().is_err());
        assert!(ScoreConfig { beta_policy: BetaPolicy::Fixed { beta: -1.0 }, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn fcfs_picks_earliest_arrival() {
        let mut q = WaitingQueue::new(0.1).unwrap();
        q.push_keyed(0, 2.0).unwrap();
        q.push_keyed(1, 1.0).unwrap();
        let cfg = ScoreConfig::default();
        assert_eq!(policy_next(Policy::Fcfs, &mut q, &cfg).unwrap().req_id, 1);
    }

    #[test]
    fn sept_picks_smaller_expectation() {
        let cfg = ScoreConfig::default();
        let mut q = WaitingQueue::new(0.1).unwrap();
        for (id, e) in [(0, 100.0), (1, 50.0)] {
            q.push(id, 1000).unwrap();
            q.update(id, e, 2.0 * e, Policy::Sept.beta(2, &cfg)).unwrap();
        }
        assert_eq!(policy_next(Policy::Sept, &mut q, &cfg).unwrap().req_id, 1);
    }

    #[test]
    fn tie_prefers_lighter_tail() {
        let cfg = ScoreConfig { beta_policy: BetaPolicy::Fixed { beta: 0.3 }, ..Default::default() };
        let mut q = WaitingQueue::new(cfg.rebuild_drift).unwrap();
        for (id, cv) in [(0, 900.0), (1, 200.0)] {
            q.push(id, 1000).unwrap();
            q.update(id, 100.0, cv, Policy::Tie.beta(2, &cfg)).unwrap();
        }
        assert_eq!(policy_next(Policy::Tie, &mut q, &cfg).unwrap().req_id, 1);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("sjf".parse::<Policy>().is_err());
    }

    #[test]
    fn scorer_families_bound_by_cap() {
        let pd = PredictedDist { mu_hat: 5.0, sigma_hat: 1.0 };
        for family in [ScoringFamily::LogT, ScoringFamily::LogNormal] {
            let s = Scorer::new(&McSettings { family, ..Default::default() }, 0.9).unwrap();
            let (e, cv) = s.moments(&pd, 512).unwrap();
            assert!(0.0 < e && e <= cv && cv <= 512.0, "{family:?}: {e} {cv}");
        }
    }
}
