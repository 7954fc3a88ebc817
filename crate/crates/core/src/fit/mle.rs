use std::f64::consts::PI;

use super::optim::{minimize, BfgsOptions};
use super::{check_samples, Family, FitError, FitParams, FitResult};
use crate::dist::{ln_gamma, LogTParams};

/// Lower bound on fitted scale parameters.
pub const SIGMA_FLOOR: f64 = 1e-6;
const MAX_ITER: usize = 500;
/// Tolerance on the per-sample gradient in `(μ, ln σ)`.
const GRAD_TOL: f64 = 1e-10;
const MAD_TO_SD: f64 = 1.4826;

fn ln_t_norm(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

/// Log-likelihood `Σ [ln t_ν(z_i) − ln σ − ln x_i]`, `z_i = (ln x_i − μ)/σ`.
pub fn loglik_logt(samples: &[f64], params: &LogTParams) -> Result<f64, FitError> {
    check_samples(samples, 1)?;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    Ok(loglik_logs(&logs, params.mu, params.sigma, params.nu))
}

fn loglik_logs(logs: &[f64], mu: f64, sigma: f64, nu: f64) -> f64 {
    let c = ln_t_norm(nu) - sigma.ln();
    logs.iter()
        .map(|&l| {
            let z = (l - mu) / sigma;
            c - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p() - l
        })
        .sum()
}

/// Analytic gradient `(∂ℓ/∂μ, ∂ℓ/∂σ)` of [`loglik_logt`].
pub fn grad_loglik_logt(samples: &[f64], params: &LogTParams) -> Result<(f64, f64), FitError> {
    check_samples(samples, 1)?;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    Ok(grad_logs(&logs, params.mu, params.sigma, params.nu))
}

fn grad_logs(logs: &[f64], mu: f64, sigma: f64, nu: f64) -> (f64, f64) {
    let (mut dmu, mut dsigma) = (0.0, 0.0);
    for &l in logs {
        let z = (l - mu) / sigma;
        let w = (nu + 1.0) / (nu + z * z);
        dmu += w * z;
        dsigma += w * z * z - 1.0;
    }
    (dmu / sigma, dsigma / sigma)
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Robust start: median and scaled MAD of the log-lengths.
fn initial_guess(logs: &[f64]) -> (f64, f64) {
    let mut sorted = logs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median_of(&sorted);
    let mut dev: Vec<f64> = sorted.iter().map(|l| (l - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mut s0 = MAD_TO_SD * median_of(&dev);
    if s0 < SIGMA_FLOOR {
        // more than half the data tied at the median
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / logs.len() as f64;
        s0 = var.sqrt().max(SIGMA_FLOOR);
    }
    (med, s0)
}

fn all_equal(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// Maximum-likelihood `(μ, σ)` of a log-t with fixed `nu`.
///
/// Optimizes the mean negative log-likelihood over `(μ, ln σ)` with BFGS
/// and the analytic gradient, so σ stays positive without constraints.
pub fn fit_logt_fixed_nu(samples: &[f64], nu: f64) -> Result<FitResult, FitError> {
    check_samples(samples, 3)?;
    if !(nu.is_finite() && nu > 0.0) {
        return Err(FitError::Domain(format!("nu must be finite and > 0, got {nu}")));
    }
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let n = logs.len();
    if all_equal(&logs) {
        let mu = logs[0];
        return Ok(FitResult {
            family: Family::LogTFixedNu,
            params: FitParams::LogT { mu, sigma: SIGMA_FLOOR, nu },
            log_likelihood: loglik_logs(&logs, mu, SIGMA_FLOOR, nu),
            converged: true,
            iterations: 0,
            grad_norm: None,
            degenerate: true,
            n,
        });
    }

    let (mu0, s0) = initial_guess(&logs);
    let ln_floor = SIGMA_FLOOR.ln();
    let inv_n = 1.0 / n as f64;
    let objective = |theta: &[f64]| {
        let mu = theta[0];
        let sigma = theta[1].max(ln_floor).exp();
        let v = -loglik_logs(&logs, mu, sigma, nu) * inv_n;
        let (dmu, dsigma) = grad_logs(&logs, mu, sigma, nu);
        // chain rule through σ = exp(s)
        (v, vec![-dmu * inv_n, -dsigma * sigma * inv_n])
    };
    let out = minimize(objective, &[mu0, s0.ln()], BfgsOptions { max_iter: MAX_ITER, grad_tol: GRAD_TOL });
    let mu = out.x[0];
    let sigma = out.x[1].max(ln_floor).exp();
    let (dmu, dsigma) = grad_logs(&logs, mu, sigma, nu);
    Ok(FitResult {
        family: Family::LogTFixedNu,
        params: FitParams::LogT { mu, sigma, nu },
        log_likelihood: loglik_logs(&logs, mu, sigma, nu),
        converged: out.converged,
        iterations: out.iterations,
        grad_norm: Some(dmu.abs().max(dsigma.abs())),
        degenerate: false,
        n,
    })
}

/// ν grid 1.0, 1.5, …, 10.0.
pub fn default_nu_grid() -> Vec<f64> {
    (0..19).map(|i| 1.0 + 0.5 * i as f64).collect()
}

/// Fixed-ν fits over `nu_grid`, keeping the highest likelihood (first on ties).
pub fn fit_logt_free_nu(samples: &[f64], nu_grid: &[f64]) -> Result<FitResult, FitError> {
    if nu_grid.is_empty() {
        return Err(FitError::Domain("empty nu grid".into()));
    }
    let mut best: Option<FitResult> = None;
    for &nu in nu_grid {
        let fit = fit_logt_fixed_nu(samples, nu)?;
        if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
            best = Some(fit);
        }
    }
    let mut best = best.expect("non-empty grid");
    best.family = Family::LogTFreeNu;
    Ok(best)
}

/// Closed-form log-normal MLE (population standard deviation of `ln x`).
pub fn fit_lognormal(samples: &[f64]) -> Result<FitResult, FitError> {
    check_samples(samples, 2)?;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let sd = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n).sqrt();
    let degenerate = sd < SIGMA_FLOOR;
    let sigma = sd.max(SIGMA_FLOOR);
    let ll = logs
        .iter()
        .map(|&l| {
            let z = (l - mu) / sigma;
            -l - sigma.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
        })
        .sum();
    Ok(FitResult {
        family: Family::LogNormal,
        params: FitParams::LogNormal { mu, sigma },
        log_likelihood: ll,
        converged: true,
        iterations: 0,
        grad_norm: None,
        degenerate,
        n: logs.len(),
    })
}

/// Exponential MLE: `rate = 1 / mean`.
pub fn fit_exponential(samples: &[f64]) -> Result<FitResult, FitError> {
    check_samples(samples, 1)?;
    let n = samples.len() as f64;
    let total: f64 = samples.iter().sum();
    let rate = n / total;
    Ok(FitResult {
        family: Family::Exponential,
        params: FitParams::Exponential { rate },
        log_likelihood: n * rate.ln() - rate * total,
        converged: true,
        iterations: 0,
        grad_norm: None,
        degenerate: all_equal(samples),
        n: samples.len(),
    })
}
