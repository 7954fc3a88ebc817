use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tailsched::fit::io::{load_grouped, PromptSamples};
use tailsched::fit::{default_nu_grid, fit_logt_fixed_nu, ks_test};
use tailsched::workload::gen_prompt_samples;

use crate::args::{NuSweepArgs, RepeatSweepArgs};
use crate::config::PromptSection;
use crate::output::{csv_string, fmt4, strings, text_table, CmdOutput, OutDir};
use crate::plot::{line_chart, Series};
use crate::CliError;

pub const BASELINE_REPS: usize = 100;
/// The fixed-ν log-t fit needs at least three samples.
pub const MIN_REPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub rep_count: usize,
    /// Mean `|μ̂_r − μ̂_100| / |μ̂_100|` over trials.
    pub mu_rel_err: f64,
    pub sigma_rel_err: f64,
    /// Same, against the generating `(μ, σ)`.
    pub mu_rel_err_truth: f64,
    pub sigma_rel_err_truth: f64,
}

/// Each trial draws a truth, generates 100 lengths and fits the first `r`.
pub fn run_repeat_sweep(reps: &[usize], trials: usize, prompts: &PromptSection, seed: u64) -> Result<Vec<RepRow>, CliError> {
    if reps.is_empty() || reps.iter().any(|&r| !(MIN_REPS..=BASELINE_REPS).contains(&r)) {
        return Err(CliError::Config(format!("--reps values must lie in [{MIN_REPS}, {BASELINE_REPS}]")));
    }
    if !reps.contains(&BASELINE_REPS) {
        return Err(CliError::Config(format!("--reps must include the baseline {BASELINE_REPS}")));
    }
    if trials == 0 {
        return Err(CliError::Config("--trials must be ≥ 1".into()));
    }
    let mut spec = prompts.spec(seed);
    spec.n_prompts = trials;
    spec.draws_per_prompt = BASELINE_REPS;
    let data = gen_prompt_samples(&spec).map_err(|e| CliError::Config(e.to_string()))?;
    let nu = prompts.nu;
    let fit_ms = |xs: &[f64]| -> Result<(f64, f64), CliError> {
        let f = fit_logt_fixed_nu(xs, nu).map_err(|e| CliError::Stat(e.to_string()))?;
        Ok(f.params.location_scale().expect("log-t fit has location and scale"))
    };
    // per trial: one (mu, sigma) estimate per entry of `reps`, plus the baseline
    let per_trial: Vec<((f64, f64), Vec<(f64, f64)>)> = data
        .par_iter()
        .map(|p| {
            let base = fit_ms(&p.samples.lengths)?;
            let fits = reps.iter().map(|&r| fit_ms(&p.samples.lengths[..r])).collect::<Result<_, _>>()?;
            Ok((base, fits))
        })
        .collect::<Result<_, CliError>>()?;
    let n = trials as f64;
    Ok(reps
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let mut acc = [0.0; 4];
            for (p, (base, fits)) in data.iter().zip(&per_trial) {
                let (m, s) = fits[j];
                acc[0] += (m - base.0).abs() / base.0.abs();
                acc[1] += (s - base.1).abs() / base.1;
                acc[2] += (m - p.mu).abs() / p.mu.abs();
                acc[3] += (s - p.sigma).abs() / p.sigma;
            }
            RepRow {
                rep_count: r,
                mu_rel_err: acc[0] / n,
                sigma_rel_err: acc[1] / n,
                mu_rel_err_truth: acc[2] / n,
                sigma_rel_err_truth: acc[3] / n,
            }
        })
        .collect())
}

pub fn cmd_repeat_sweep(args: &RepeatSweepArgs) -> Result<CmdOutput, CliError> {
    let cfg = args.common.resolve()?;
    let rows = run_repeat_sweep(&args.reps, args.trials, &cfg.prompts, cfg.seed)?;
    let mut out = OutDir::create(args.common.out_dir("repeat-sweep"))?;
    let header = strings(&["rep_count", "mu_rel_err", "sigma_rel_err", "mu_rel_err_truth", "sigma_rel_err_truth"]);
    let cells = |f: &dyn Fn(f64) -> String| -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| {
                let mut c = vec![r.rep_count.to_string()];
                c.extend([r.mu_rel_err, r.sigma_rel_err, r.mu_rel_err_truth, r.sigma_rel_err_truth].map(f));
                c
            })
            .collect()
    };
    out.write("repeat_sweep.csv", &csv_string(&header, &cells(&|x| x.to_string())))?;
    if args.common.svg {
        let pts = |g: fn(&RepRow) -> f64| rows.iter().map(|r| (r.rep_count as f64, g(r))).collect();
        let series = [
            Series { name: "mu vs 100-rep fit", points: pts(|r| r.mu_rel_err) },
            Series { name: "sigma vs 100-rep fit", points: pts(|r| r.sigma_rel_err) },
            Series { name: "mu vs truth", points: pts(|r| r.mu_rel_err_truth) },
            Series { name: "sigma vs truth", points: pts(|r| r.sigma_rel_err_truth) },
        ];
        let p = out.path("repeat_sweep.svg");
        line_chart(&p, "Relative parameter error", "repetitions", "mean relative error", &series)?;
        out.track(p);
    }
    out.manifest("repeat-sweep", args, &cfg)?;
    Ok(out.finish(text_table(&header, &cells(&fmt4)), 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuRow {
    pub nu: f64,
    pub mean_p: f64,
    pub pass_rate: f64,
    pub prompts: usize,
}

/// Fixed-ν log-t fit and KS test per prompt at every ν of the grid.
pub fn run_nu_sweep(groups: &[PromptSamples], grid: &[f64]) -> Vec<NuRow> {
    grid.iter()
        .map(|&nu| {
            let ps: Vec<f64> = groups
                .par_iter()
                .filter_map(|g| {
                    let f = fit_logt_fixed_nu(&g.lengths, nu).ok()?;
                    Some(ks_test(&g.lengths, |x| f.params.cdf(x)).ok()?.p_value)
                })
                .collect();
            let n = ps.len().max(1) as f64;
            NuRow {
                nu,
                mean_p: ps.iter().sum::<f64>() / n,
                pass_rate: ps.iter().filter(|&&p| p > 0.05).count() as f64 / n,
                prompts: ps.len(),
            }
        })
        .collect()
}

pub fn synth_groups(prompts: &PromptSection, seed: u64) -> Result<Vec<PromptSamples>, CliError> {
    Ok(gen_prompt_samples(&prompts.spec(seed))
        .map_err(|e| CliError::Config(e.to_string()))?
        .into_iter()
        .map(|p| p.samples)
        .collect())
}

pub fn cmd_nu_sweep(args: &NuSweepArgs) -> Result<CmdOutput, CliError> {
    let cfg = args.common.resolve()?;
    let groups = match &args.input {
        Some(p) => load_grouped(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => synth_groups(&cfg.prompts, cfg.seed)?,
    };
    let rows = run_nu_sweep(&groups, &default_nu_grid());
    let mut out = OutDir::create(args.common.out_dir("nu-sweep"))?;
    let header = strings(&["nu", "mean_p", "pass_rate"]);
    let cells = |f: &dyn Fn(f64) -> String| -> Vec<Vec<String>> {
        rows.iter().map(|r| vec![r.nu.to_string(), f(r.mean_p), f(r.pass_rate)]).collect()
    };
    out.write("nu_sweep.csv", &csv_string(&header, &cells(&|x| x.to_string())))?;
    if args.common.svg {
        let series = [Series { name: "mean KS p-value", points: rows.iter().map(|r| (r.nu, r.mean_p)).collect() }];
        let p = out.path("nu_sweep.svg");
        line_chart(&p, "KS p-value across degrees of freedom", "nu", "mean p-value", &series)?;
        out.track(p);
    }
    out.manifest("nu-sweep", args, &cfg)?;
    let best = rows.iter().max_by(|a, b| a.mean_p.total_cmp(&b.mean_p)).map(|r| r.nu).unwrap_or(f64::NAN);
    let mut stdout = text_table(&header, &cells(&fmt4));
    stdout.push_str(&format!("best nu: {best}\n"));
    Ok(out.finish(stdout, 0))
}

