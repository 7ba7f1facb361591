//! Experiment runner for the voltsnn simulator.
//!
//! Exit codes: 0 success, 2 invalid config or arguments, 3 missing file or
//! artifact, 4 DRAM capacity exceeded, 5 any other pipeline failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Context;
use voltsnn::Error;

#[derive(Parser)]
#[command(name = "voltsnn", version, about = "SNN-on-approximate-DRAM experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Baseline STDP pre-training; writes the baseline checkpoint.
    Train(CommonArgs),
    /// Accuracy-vs-BER profile of the baseline checkpoint.
    Profile(CommonArgs),
    /// Fault-aware retraining; writes the improved checkpoint.
    Fat(CommonArgs),
    /// DRAM energy and throughput grid across formats, policies, voltages.
    Energy(CommonArgs),
    /// Reward-based model selection over the (mu, epsilon) grid.
    Select(CommonArgs),
    /// Per-figure x/y series from the pipeline outputs.
    Report(CommonArgs),
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_)
        | Error::InvalidProbability { .. }
        | Error::NegativeInput { .. } => 2,
        Error::Io(_) | Error::MissingArtifact(_) => 3,
        Error::Capacity { .. } => 4,
        _ => 5,
    }
}

fn run() -> Result<(), Error> {
    if let Ok(threads) = std::env::var("VOLTSNN_THREADS") {
        let n: usize = threads
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("VOLTSNN_THREADS={threads:?} is not a number")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }

    let cli = Cli::parse();
    type CommandFn = fn(&Context) -> Result<(), Error>;
    let (args, cmd): (&CommonArgs, CommandFn) = match &cli.command {
        Command::Train(a) => (a, commands::cmd_train),
        Command::Profile(a) => (a, commands::cmd_profile),
        Command::Fat(a) => (a, commands::cmd_fat),
        Command::Energy(a) => (a, commands::cmd_energy),
        Command::Select(a) => (a, commands::cmd_select),
        Command::Report(a) => (a, commands::cmd_report),
    };
    let ctx = Context::load(&args.config, args.seed, args.out.clone())?;
    cmd(&ctx)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
