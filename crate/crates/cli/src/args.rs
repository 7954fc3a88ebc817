use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{resolve, RunConfig};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "tailsched", version, about = "Tail-aware LLM request scheduling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit per-prompt length distributions and report KS pass rates.
    Fit(FitArgs),
    /// Check the power-law tail of the termination-rate mixture.
    TailCheck(TailCheckArgs),
    /// Run the serving simulator for one policy, or sweep RPS × policy.
    Simulate(SimulateArgs),
    /// Score-function and distribution-family ablation grid.
    Ablate(AblateArgs),
    /// Parameter error versus number of repeated generations.
    RepeatSweep(RepeatSweepArgs),
    /// Mean KS p-value of fixed-ν fits across the ν grid.
    NuSweep(NuSweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration merged over the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default `out/<command>`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub svg: bool,
    /// Dotted-path override, e.g. `--set engine.batch_capacity=4`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = resolve(self.config.as_deref(), &self.set)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    pub fn out_dir(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out").join(command))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Logt,
    LogtFree,
    Lognormal,
    Exponential,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Per-prompt samples: JSON lines, or long-form CSV `prompt_id,length`.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "logt")]
    pub family: FamilyArg,
    /// Degrees of freedom for the fixed-ν log-t family.
    #[arg(long, default_value_t = 3.5)]
    pub nu: f64,
    /// Per-prompt JSON-lines results (default `<out>/fit.jsonl`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TailCheckArgs {
    /// Tail exponent of the termination-rate density.
    #[arg(long)]
    pub alpha: f64,
    /// Number of trajectories (≥ 10^4).
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    /// Smallest length used in the log-log regression.
    #[arg(long, default_value_t = 10)]
    pub n_min: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyArg {
    Fcfs,
    Sept,
    Tie,
}

impl From<PolicyArg> for tailsched::sched::Policy {
    fn from(p: PolicyArg) -> Self {
        use tailsched::sched::Policy;
        match p {
            PolicyArg::Fcfs => Policy::Fcfs,
            PolicyArg::Sept => Policy::Sept,
            PolicyArg::Tie => Policy::Tie,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "tie")]
    pub policy: PolicyArg,
    /// Overrides `workload.rps`.
    #[arg(long)]
    pub rps: Option<f64>,
    /// Use a fixed β instead of the configured β policy.
    #[arg(long)]
    pub beta_fixed: Option<f64>,
    /// Replay a JSON-lines trace; overrides `workload.trace`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Run every policy at every RPS in `experiments.rps_sweep`.
    #[arg(long)]
    pub sweep: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AblateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RepeatSweepArgs {
    /// Repetition counts; the largest is the baseline and must be 100.
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 20, 50, 100])]
    pub reps: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NuSweepArgs {
    /// Per-prompt samples; synthesized from the `prompts` config section when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
}
