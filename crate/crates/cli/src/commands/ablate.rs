use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tailsched::sched::{BetaPolicy, Policy, ScoringFamily};
use tailsched::sim::WindowThroughput;

use super::simulate::{build_workload, simulate_policy};
use crate::args::AblateArgs;
use crate::config::RunConfig;
use crate::output::{csv_string, fmt4, strings, text_table, CmdOutput, OutDir};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreVariant {
    Sept,
    TieFixed { beta: f64 },
    TieAdaptive,
}

impl ScoreVariant {
    pub fn label(&self) -> String {
        match self {
            ScoreVariant::Sept => "sept".into(),
            ScoreVariant::TieFixed { beta } => format!("tie_beta_{beta}"),
            ScoreVariant::TieAdaptive => "tie_adaptive".into(),
        }
    }
}

pub fn family_label(f: ScoringFamily) -> &'static str {
    match f {
        ScoringFamily::LogT => "log_t",
        ScoringFamily::LogNormal => "log_normal",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblateRun {
    pub variant: ScoreVariant,
    pub family: ScoringFamily,
    pub seed: u64,
    pub ptla_avg: f64,
    pub ptla_p90: f64,
    pub ttft_avg: f64,
    pub ttft_p90: f64,
    pub time_at_k: BTreeMap<usize, f64>,
    pub throughput_at_w: Vec<WindowThroughput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblateRow {
    pub variant: ScoreVariant,
    pub family: ScoringFamily,
    pub seeds: usize,
    pub ptla_avg: f64,
    pub ptla_p90: f64,
    pub ttft_avg: f64,
    pub ttft_p90: f64,
    /// Means over seeds; absent when some seed finished fewer than K requests.
    pub time_at_k: BTreeMap<usize, Option<f64>>,
    pub throughput_at_w: Vec<(f64, f64)>,
    /// Seeds where this row's avg PTLA is ≤ SEPT's under the same family.
    pub seeds_at_or_below_sept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub runs: Vec<AblateRun>,
    pub rows: Vec<AblateRow>,
}

pub fn variants(cfg: &RunConfig) -> Vec<ScoreVariant> {
    let mut v = vec![ScoreVariant::Sept];
    v.extend(cfg.experiments.ablate_fixed_betas.iter().map(|&beta| ScoreVariant::TieFixed { beta }));
    v.push(ScoreVariant::TieAdaptive);
    v
}

fn configure(cfg: &RunConfig, variant: ScoreVariant, family: ScoringFamily) -> (RunConfig, Policy) {
    let mut c = cfg.clone();
    c.predictor.scoring.family = family;
    let policy = match variant {
        ScoreVariant::Sept => Policy::Sept,
        ScoreVariant::TieFixed { beta } => {
            c.score.beta_policy = BetaPolicy::Fixed { beta };
            Policy::Tie
        }
        ScoreVariant::TieAdaptive => {
            if !matches!(c.score.beta_policy, BetaPolicy::AdaptiveLinear { .. }) {
                c.score.beta_policy = BetaPolicy::default();
            }
            Policy::Tie
        }
    };
    (c, policy)
}

/// Grid {SEPT, fixed β…, adaptive β} × {log-t, log-normal} over the configured seeds.
pub fn run_ablation(cfg: &RunConfig) -> Result<Ablation, CliError> {
    let seeds = cfg.seeds();
    let workloads: Vec<_> = seeds.par_iter().map(|&s| build_workload(cfg, s)).collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for v in variants(cfg) {
        for f in [ScoringFamily::LogT, ScoringFamily::LogNormal] {
            for (si, &seed) in seeds.iter().enumerate() {
                jobs.push((v, f, si, seed));
            }
        }
    }
    let runs: Vec<AblateRun> = jobs
        .par_iter()
        .map(|&(variant, family, si, seed)| {
            let (c, policy) = configure(cfg, variant, family);
            let r = simulate_policy(&c, policy, &workloads[si], seed)?;
            let a = r.aggregates;
            Ok(AblateRun {
                variant,
                family,
                seed,
                ptla_avg: a.ptla_avg,
                ptla_p90: a.ptla_p90,
                ttft_avg: a.ttft_avg,
                ttft_p90: a.ttft_p90,
                time_at_k: a.time_at_k,
                throughput_at_w: a.throughput_at_w,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let mut rows = Vec::new();
    for v in variants(cfg) {
        for f in [ScoringFamily::LogT, ScoringFamily::LogNormal] {
            let mine: Vec<&AblateRun> = runs.iter().filter(|r| r.variant == v && r.family == f).collect();
            let sept: Vec<&AblateRun> = runs.iter().filter(|r| r.variant == ScoreVariant::Sept && r.family == f).collect();
            let n = mine.len() as f64;
            let mean = |g: fn(&AblateRun) -> f64| mine.iter().map(|r| g(r)).sum::<f64>() / n;
            let time_at_k = cfg
                .metrics
                .ks
                .iter()
                .map(|&k| {
                    let vals: Option<Vec<f64>> = mine.iter().map(|r| r.time_at_k.get(&k).copied()).collect();
                    (k, vals.map(|v| v.iter().sum::<f64>() / n))
                })
                .collect();
            let throughput_at_w = cfg
                .metrics
                .windows_s
                .iter()
                .enumerate()
                .map(|(i, &w)| (w, mine.iter().map(|r| r.throughput_at_w[i].completed as f64).sum::<f64>() / n))
                .collect();
            let wins = mine.iter().zip(&sept).filter(|(m, s)| m.ptla_avg <= s.ptla_avg).count();
            rows.push(AblateRow {
                variant: v,
                family: f,
                seeds: mine.len(),
                ptla_avg: mean(|r| r.ptla_avg),
                ptla_p90: mean(|r| r.ptla_p90),
                ttft_avg: mean(|r| r.ttft_avg),
                ttft_p90: mean(|r| r.ttft_p90),
                time_at_k,
                throughput_at_w,
                seeds_at_or_below_sept: wins,
            });
        }
    }
    Ok(Ablation { runs, rows })
}

fn metric_header(cfg: &RunConfig) -> Vec<String> {
    let mut h = strings(&["ptla_avg", "ptla_p90", "ttft_avg", "ttft_p90"]);
    h.extend(cfg.metrics.ks.iter().map(|k| format!("time_at_{k}")));
    h.extend(cfg.metrics.windows_s.iter().map(|w| format!("throughput_at_{w}s")));
    h
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<CmdOutput, CliError> {
    let cfg = args.common.resolve()?;
    let ab = run_ablation(&cfg)?;
    let mut out = OutDir::create(args.common.out_dir("ablate"))?;

    let mut header = strings(&["score", "family", "seeds"]);
    header.extend(metric_header(&cfg));
    header.push("seeds_at_or_below_sept".into());
    let row_cells = |r: &AblateRow, fmt: &dyn Fn(f64) -> String| {
        let mut c = vec![r.variant.label(), family_label(r.family).to_string(), r.seeds.to_string()];
        c.extend([r.ptla_avg, r.ptla_p90, r.ttft_avg, r.ttft_p90].map(fmt));
        c.extend(r.time_at_k.values().map(|v| v.map(fmt).unwrap_or_default()));
        c.extend(r.throughput_at_w.iter().map(|(_, x)| fmt(*x)));
        c.push(r.seeds_at_or_below_sept.to_string());
        c
    };
    let exact = |x: f64| x.to_string();
    let csv_rows: Vec<Vec<String>> = ab.rows.iter().map(|r| row_cells(r, &exact)).collect();
    out.write("ablate.csv", &csv_string(&header, &csv_rows))?;

    let mut run_header = strings(&["score", "family", "seed"]);
    run_header.extend(metric_header(&cfg));
    let run_rows: Vec<Vec<String>> = ab
        .runs
        .iter()
        .map(|r| {
            let mut c = vec![r.variant.label(), family_label(r.family).to_string(), r.seed.to_string()];
            c.extend([r.ptla_avg, r.ptla_p90, r.ttft_avg, r.ttft_p90].map(|x| x.to_string()));
            c.extend(cfg.metrics.ks.iter().map(|k| r.time_at_k.get(k).map(|v| v.to_string()).unwrap_or_default()));
            c.extend(r.throughput_at_w.iter().map(|w| w.completed.to_string()));
            c
        })
        .collect();
    out.write("ablate_runs.csv", &csv_string(&run_header, &run_rows))?;
    out.manifest("ablate", args, &cfg)?;

    let shown: Vec<Vec<String>> = ab.rows.iter().map(|r| row_cells(r, &fmt4)).collect();
    Ok(out.finish(text_table(&header, &shown), 0))
}
