use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tailsched::fit::io::{load_grouped, PromptSamples};
use tailsched::fit::{
    default_nu_grid, fit_exponential, fit_lognormal, fit_logt_fixed_nu, fit_logt_free_nu, ks_test, tail_stats,
    Family, FitError, FitResult, KsResult, TailStats,
};

use crate::args::{FamilyArg, FitArgs};
use crate::output::{csv_string, fmt4, strings, text_table, CmdOutput, OutDir};
use crate::CliError;

pub fn families(arg: FamilyArg) -> Vec<Family> {
    match arg {
        FamilyArg::Logt => vec![Family::LogTFixedNu],
        FamilyArg::LogtFree => vec![Family::LogTFreeNu],
        FamilyArg::Lognormal => vec![Family::LogNormal],
        FamilyArg::Exponential => vec![Family::Exponential],
        FamilyArg::All => Family::ALL.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptFitRecord {
    pub prompt_id: String,
    pub n: usize,
    pub family: Family,
    pub fit: Option<FitResult>,
    pub ks: Option<KsResult>,
    pub tail: Option<TailStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: Family,
    pub prompts_fitted: usize,
    pub prompts_failed: usize,
    pub ks_pass_rate: f64,
    pub mean_ks_p: f64,
    pub mean_log_likelihood: f64,
}

pub fn fit_one(samples: &[f64], family: Family, nu: f64) -> Result<FitResult, FitError> {
    match family {
        Family::LogTFixedNu => fit_logt_fixed_nu(samples, nu),
        Family::LogTFreeNu => fit_logt_free_nu(samples, &default_nu_grid()),
        Family::LogNormal => fit_lognormal(samples),
        Family::Exponential => fit_exponential(samples),
    }
}

pub fn fit_and_test(samples: &[f64], family: Family, nu: f64) -> Result<(FitResult, KsResult), FitError> {
    let fit = fit_one(samples, family, nu)?;
    let ks = ks_test(samples, |x| fit.params.cdf(x))?;
    Ok((fit, ks))
}

/// One record per (prompt, family), prompts in input order.
pub fn fit_prompts(groups: &[PromptSamples], fams: &[Family], nu: f64) -> Vec<PromptFitRecord> {
    groups
        .par_iter()
        .flat_map_iter(|g| {
            let tail = tail_stats(&g.lengths).ok();
            fams.iter().map(move |&family| {
                let (fit, ks, error) = match fit_and_test(&g.lengths, family, nu) {
                    Ok((f, k)) => (Some(f), Some(k), None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                PromptFitRecord { prompt_id: g.prompt_id.clone(), n: g.lengths.len(), family, fit, ks, tail, error }
            })
        })
        .collect()
}

pub fn summarize_fits(records: &[PromptFitRecord], fams: &[Family]) -> Vec<FamilySummary> {
    fams.iter()
        .map(|&family| {
            let ok: Vec<(&FitResult, &KsResult)> = records
                .iter()
                .filter(|r| r.family == family)
                .filter_map(|r| Some((r.fit.as_ref()?, r.ks.as_ref()?)))
                .collect();
            let failed = records.iter().filter(|r| r.family == family && r.error.is_some()).count();
            let n = ok.len().max(1) as f64;
            FamilySummary {
                family,
                prompts_fitted: ok.len(),
                prompts_failed: failed,
                ks_pass_rate: ok.iter().filter(|(_, k)| k.passes()).count() as f64 / n,
                mean_ks_p: ok.iter().map(|(_, k)| k.p_value).sum::<f64>() / n,
                mean_log_likelihood: ok.iter().map(|(f, _)| f.log_likelihood).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn summary_rows(s: &[FamilySummary]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = strings(&["family", "fitted", "failed", "ks_pass_rate", "mean_ks_p", "mean_loglik"]);
    let rows = s
        .iter()
        .map(|f| {
            vec![
                f.family.name().to_string(),
                f.prompts_fitted.to_string(),
                f.prompts_failed.to_string(),
                fmt4(f.ks_pass_rate),
                fmt4(f.mean_ks_p),
                fmt4(f.mean_log_likelihood),
            ]
        })
        .collect();
    (header, rows)
}

pub fn cmd_fit(args: &FitArgs) -> Result<CmdOutput, CliError> {
    let cfg = args.common.resolve()?;
    if !(args.nu.is_finite() && args.nu > 0.0) {
        return Err(CliError::Config("--nu must be finite and > 0".into()));
    }
    let groups = load_grouped(&args.input).map_err(|e| CliError::Config(format!("{}: {e}", args.input.display())))?;
    if groups.is_empty() {
        return Err(CliError::Config(format!("{}: no samples", args.input.display())));
    }
    let fams = families(args.family);
    let records = fit_prompts(&groups, &fams, args.nu);
    let summary = summarize_fits(&records, &fams);

    let mut out = OutDir::create(args.common.out_dir("fit"))?;
    let jsonl: String = records.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect();
    match &args.output {
        Some(p) => {
            std::fs::write(p, &jsonl)?;
            out.track(p.clone());
        }
        None => {
            out.write("fit.jsonl", &jsonl)?;
        }
    }
    let (header, rows) = summary_rows(&summary);
    out.write("fit_summary.csv", &csv_string(&header, &rows))?;
    out.manifest("fit", args, &cfg)?;

    let mut stdout = text_table(&header, &rows);
    if let [only] = summary.as_slice() {
        stdout.push_str(&format!("KS pass rate (p > 0.05): {:.4}\n", only.ks_pass_rate));
    }
    Ok(out.finish(stdout, 0))
}
