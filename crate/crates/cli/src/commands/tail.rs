use serde::{Deserialize, Serialize};
use tailsched::dist::ln_gamma;
use tailsched::fit::{fit_tail_slope, FitError, MIN_TAIL_SAMPLES};
use tailsched::workload::{gen_termination_mixture, TailLawSpec};

use crate::args::TailCheckArgs;
use crate::output::{CmdOutput, OutDir};
use crate::CliError;

/// Largest accepted |α̂ − α|.
pub const ALPHA_TOLERANCE: f64 = 0.15;
/// Length at which `n^α · P(L > n)` is compared with `Γ(α + 1)`.
pub const CONSTANT_AT: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheckSummary {
    pub alpha: f64,
    pub n: usize,
    pub n_min: u64,
    pub seed: u64,
    pub alpha_hat: f64,
    pub r_squared: f64,
    pub n_tail_points: usize,
    pub constant_at: u64,
    /// `n^α · S(n)` at `n = constant_at`.
    pub scaled_survival: f64,
    /// `Γ(α + 1)`, the limit of the scaled survival.
    pub gamma_limit: f64,
    pub passed: bool,
}

pub fn run_tail_check(alpha: f64, n: usize, n_min: u64, seed: u64) -> Result<TailCheckSummary, CliError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(CliError::Config(format!("--alpha must be finite and > 0, got {alpha}")));
    }
    if n < MIN_TAIL_SAMPLES {
        return Err(CliError::Config(format!("--n must be ≥ {MIN_TAIL_SAMPLES}, got {n}")));
    }
    if n_min < 1 {
        return Err(CliError::Config("--n-min must be ≥ 1".into()));
    }
    let lengths = gen_termination_mixture(&TailLawSpec { alpha, n, seed }).map_err(|e| CliError::Config(e.to_string()))?;
    let fit = fit_tail_slope(&lengths, n_min).map_err(|e| match e {
        FitError::InsufficientTail { .. } => CliError::Stat(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    let above = lengths.iter().filter(|&&l| l > CONSTANT_AT).count();
    let survival = above as f64 / n as f64;
    Ok(TailCheckSummary {
        alpha,
        n,
        n_min,
        seed,
        alpha_hat: fit.alpha_hat,
        r_squared: fit.r_squared,
        n_tail_points: fit.n_tail_points,
        constant_at: CONSTANT_AT,
        scaled_survival: (CONSTANT_AT as f64).powf(alpha) * survival,
        gamma_limit: ln_gamma(alpha + 1.0).exp(),
        passed: (fit.alpha_hat - alpha).abs() <= ALPHA_TOLERANCE,
    })
}

pub fn cmd_tail_check(args: &TailCheckArgs) -> Result<CmdOutput, CliError> {
    let cfg = args.common.resolve()?;
    let s = run_tail_check(args.alpha, args.n, args.n_min, cfg.seed)?;
    let mut out = OutDir::create(args.common.out_dir("tail-check"))?;
    out.write("tail_check.json", &(serde_json::to_string_pretty(&s).expect("summary serializes") + "\n"))?;
    out.manifest("tail-check", args, &cfg)?;
    let stdout = format!(
        "alpha            {}\nalpha_hat        {:.4}\nr_squared        {:.4}\ntail_points      {}\n\
         n^a*S(n) @ {}   {:.4}\nGamma(alpha+1)   {:.4}\nresult           {}\n",
        s.alpha,
        s.alpha_hat,
        s.r_squared,
        s.n_tail_points,
        s.constant_at,
        s.scaled_survival,
        s.gamma_limit,
        if s.passed { "pass" } else { "FAIL" }
    );
    Ok(out.finish(stdout, if s.passed { 0 } else { 3 }))
}
