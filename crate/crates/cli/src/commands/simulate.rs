use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tailsched::sched::{BetaPolicy, Policy};
use tailsched::sim::{events_to_csv, run_sim, SimReport, SimSetup};
use tailsched::workload::{gen_logt_workload, load_trace, Request};

use crate::args::SimulateArgs;
use crate::config::RunConfig;
use crate::output::{csv_string, fmt4, strings, text_table, CmdOutput, OutDir};
use crate::plot::{heatmap_chart, line_chart, Series};
use crate::CliError;

/// Synthetic workload for `seed`, or the configured trace.
pub fn build_workload(cfg: &RunConfig, seed: u64) -> Result<Vec<Request>, CliError> {
    match &cfg.workload.trace {
        Some(path) => load_trace(path, Some(cfg.workload.rps), seed)
            .map_err(|e| CliError::Config(format!("trace {}: {e}", path.display()))),
        None => gen_logt_workload(&cfg.workload.spec(seed)).map_err(|e| CliError::Config(e.to_string())),
    }
}

pub fn simulate_policy(cfg: &RunConfig, policy: Policy, workload: &[Request], seed: u64) -> Result<SimReport, CliError> {
    let setup = SimSetup {
        policy,
        score: &cfg.score,
        engine: &cfg.engine,
        predictor: &cfg.predictor,
        metrics: &cfg.metrics,
        seed,
    };
    run_sim(workload, &setup).map_err(|e| CliError::Config(e.to_string()))
}

fn headline_header() -> Vec<String> {
    strings(&["policy", "rps", "ttft_avg", "ttft_p90", "ptla_avg", "ptla_p90"])
}

fn headline_row(policy: Policy, rps: f64, r: &SimReport) -> Vec<String> {
    let a = &r.aggregates;
    vec![
        policy.name().to_string(),
        rps.to_string(),
        fmt4(a.ttft_avg),
        fmt4(a.ttft_p90),
        fmt4(a.ptla_avg),
        fmt4(a.ptla_p90),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rps: f64,
    pub policy: Policy,
    pub report: SimReport,
}

/// Every policy at every RPS of `experiments.rps_sweep`, on the master seed.
pub fn run_rps_sweep(cfg: &RunConfig) -> Result<Vec<SweepPoint>, CliError> {
    let jobs: Vec<(f64, Policy)> =
        cfg.experiments.rps_sweep.iter().flat_map(|&r| Policy::ALL.into_iter().map(move |p| (r, p))).collect();
    jobs.par_iter()
        .map(|&(rps, policy)| {
            let mut c = cfg.clone();
            c.workload.rps = rps;
            let w = build_workload(&c, c.seed)?;
            let report = simulate_policy(&c, policy, &w, c.seed)?;
            Ok(SweepPoint { rps, policy, report })
        })
        .collect()
}

pub fn apply_simulate_overrides(args: &SimulateArgs, cfg: &mut RunConfig) -> Result<(), CliError> {
    if let Some(r) = args.rps {
        if !(r.is_finite() && r > 0.0) {
            return Err(CliError::Config("--rps must be > 0".into()));
        }
        cfg.workload.rps = r;
    }
    if let Some(b) = args.beta_fixed {
        cfg.score.beta_policy = BetaPolicy::Fixed { beta: b };
    }
    if let Some(t) = &args.trace {
        cfg.workload.trace = Some(t.clone());
    }
    cfg.score.validate().map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<CmdOutput, CliError> {
    let mut cfg = args.common.resolve()?;
    apply_simulate_overrides(args, &mut cfg)?;
    let mut out = OutDir::create(args.common.out_dir("simulate"))?;

    if args.sweep {
        let points = run_rps_sweep(&cfg)?;
        let header = headline_header();
        let rows: Vec<Vec<String>> = points.iter().map(|p| headline_row(p.policy, p.rps, &p.report)).collect();
        let csv_rows: Vec<Vec<String>> = points
            .iter()
            .map(|p| {
                let a = &p.report.aggregates;
                vec![
                    p.rps.to_string(),
                    p.policy.name().to_string(),
                    a.ttft_avg.to_string(),
                    a.ttft_p90.to_string(),
                    a.ptla_avg.to_string(),
                    a.ptla_p90.to_string(),
                ]
            })
            .collect();
        out.write("sweep.csv", &csv_string(&strings(&["rps", "policy", "ttft_avg", "ttft_p90", "ptla_avg", "ptla_p90"]), &csv_rows))?;
        if args.common.svg {
            let series: Vec<Series> = Policy::ALL
                .iter()
                .map(|&pol| Series {
                    name: pol.name(),
                    points: points.iter().filter(|p| p.policy == pol).map(|p| (p.rps, p.report.aggregates.ptla_avg)).collect(),
                })
                .collect();
            let p = out.path("ptla_vs_rps.svg");
            line_chart(&p, "Average per-token latency", "requests per second", "seconds per token", &series)?;
            out.track(p);
        }
        out.manifest("simulate", args, &cfg)?;
        return Ok(out.finish(text_table(&header, &rows), 0));
    }

    let policy: Policy = args.policy.into();
    let workload = build_workload(&cfg, cfg.seed)?;
    let report = simulate_policy(&cfg, policy, &workload, cfg.seed)?;
    out.write("report.json", &(report.to_json() + "\n"))?;
    out.write("events.csv", &events_to_csv(&report.events))?;
    if let Some(h) = &report.heatmap {
        out.write("heatmap.csv", &h.to_csv())?;
        if args.common.svg {
            let p = out.path("heatmap.svg");
            heatmap_chart(&p, &format!("Completion time vs output length ({})", policy.name()), h)?;
            out.track(p);
        }
    }
    out.manifest("simulate", args, &cfg)?;
    let stdout = text_table(&headline_header(), &[headline_row(policy, cfg.workload.rps, &report)]);
    Ok(out.finish(stdout, 0))
}
