//! Fitting output-length distributions and checking the fits.
//!
//! Per-prompt generation lengths are fitted by maximum likelihood as log-t
//! (fixed or grid-selected ν), log-normal or exponential; fits are judged
//! with a one-sample Kolmogorov–Smirnov test. [`tail`] holds the
//! heavy-tail descriptive statistics and the log-log survival regression
//! used to check the power-law tail of the termination-rate mixture.

pub mod io;
mod ks;
mod mle;
mod optim;
mod tail;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{self, DistError, LogTParams};

pub use ks::{kolmogorov_survival, ks_test, KsResult};
pub use mle::{
    default_nu_grid, fit_exponential, fit_lognormal, fit_logt_fixed_nu, fit_logt_free_nu,
    grad_loglik_logt, loglik_logt, SIGMA_FLOOR,
};
pub use optim::{minimize, BfgsOptions, BfgsOutcome};
pub use tail::{fit_loglog, fit_tail_slope, nearest_rank, tail_stats, TailLawFit, TailStats, MIN_TAIL_SAMPLES};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("insufficient tail: {usable} usable tail points, need at least 5")]
    InsufficientTail { usable: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<DistError> for FitError {
    fn from(e: DistError) -> Self {
        FitError::Domain(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LogTFixedNu,
    LogTFreeNu,
    LogNormal,
    Exponential,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::LogTFixedNu, Family::LogTFreeNu, Family::LogNormal, Family::Exponential];

    pub fn name(&self) -> &'static str {
        match self {
            Family::LogTFixedNu => "logt",
            Family::LogTFreeNu => "logt_free_nu",
            Family::LogNormal => "lognormal",
            Family::Exponential => "exponential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitParams {
    LogT { mu: f64, sigma: f64, nu: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
}

impl FitParams {
    /// CDF of the fitted distribution.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            FitParams::LogT { mu, sigma, nu } => {
                dist::StdVariate::StudentT { nu }.cdf((x.ln() - mu) / sigma)
            }
            FitParams::LogNormal { mu, sigma } => dist::StdVariate::Normal.cdf((x.ln() - mu) / sigma),
            FitParams::Exponential { rate } => -(-rate * x).exp_m1(),
        }
    }

    /// `(μ, σ)` in log space for the log-location-scale families.
    pub fn location_scale(&self) -> Option<(f64, f64)> {
        match *self {
            FitParams::LogT { mu, sigma, .. } | FitParams::LogNormal { mu, sigma } => Some((mu, sigma)),
            FitParams::Exponential { .. } => None,
        }
    }

    pub fn as_logt(&self) -> Option<LogTParams> {
        match *self {
            FitParams::LogT { mu, sigma, nu } => LogTParams::new(mu, sigma, nu).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub params: FitParams,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest absolute component of the log-likelihood gradient at the
    /// returned point, where a gradient is defined.
    pub grad_norm: Option<f64>,
    /// All samples identical; the scale sits at its floor.
    pub degenerate: bool,
    pub n: usize,
}

pub(crate) fn check_samples(samples: &[f64], needed: usize) -> Result<(), FitError> {
    if samples.len() < needed {
        return Err(FitError::InsufficientData { needed, got: samples.len() });
    }
    if let Some(bad) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(FitError::Domain(format!("samples must be finite and > 0, got {bad}")));
    }
    Ok(())
}
