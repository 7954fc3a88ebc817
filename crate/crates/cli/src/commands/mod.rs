pub mod ablate;
pub mod fit;
pub mod simulate;
pub mod sweeps;
pub mod tail;

use crate::args::{Cli, Command};
use crate::output::CmdOutput;
use crate::CliError;

pub fn run(cli: &Cli) -> Result<CmdOutput, CliError> {
    match &cli.command {
        Command::Fit(a) => fit::cmd_fit(a),
        Command::TailCheck(a) => tail::cmd_tail_check(a),
        Command::Simulate(a) => simulate::cmd_simulate(a),
        Command::Ablate(a) => ablate::cmd_ablate(a),
        Command::RepeatSweep(a) => sweeps::cmd_repeat_sweep(a),
        Command::NuSweep(a) => sweeps::cmd_nu_sweep(a),
    }
}
