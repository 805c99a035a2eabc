pub mod bench;
pub mod detect;
pub mod eval;
pub mod fit_stats;
pub mod ingest;
pub mod perturb;
pub mod score;
pub mod synth;
pub mod train;

use crate::CliResult;
use crate::args::Command;

pub fn run(command: &Command) -> CliResult {
    match command {
        Command::Synth(args) => synth::run(args),
        Command::Ingest(args) => ingest::run(args),
        Command::Train(args) => train::run(args),
        Command::FitStats(args) => fit_stats::run(args),
        Command::Detect(args) => detect::run(args),
        Command::Score(args) => score::run(args),
        Command::Perturb(args) => perturb::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Bench(args) => bench::run(args),
    }
}
