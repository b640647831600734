//! `motionssm` command-line tool.
//!
//! Subcommands cover the full pipeline: simulating the temporal model,
//! fitting and online-adapting its parameters, deformation-field tools,
//! evaluation metrics, and the synthetic ground-truth experiments. Every
//! subcommand is deterministic for a fixed seed and writes plot-ready CSV
//! or MSEQ tensor files.
//!
//! Exit codes: 0 success, 2 input/parse error, 3 numeric failure,
//! 4 precondition violation.

mod cmds;
mod report;

use clap::{Parser, Subcommand};
use motionssm::Error;

#[derive(Parser)]
#[command(
    name = "motionssm",
    about = "Probabilistic motion modeling: filtering, forecasting, imputation, online learning, and diffeomorphic deformation tools.",
    long_about = None,
    after_help = "The environment variable MOTIONSSM_THREADS caps internal parallelism (default: all cores).\n\
                  Exit codes: 0 success, 2 input/parse error, 3 numeric failure, 4 precondition violation."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate latent and observed trajectories from a parameter file.
    Simulate(cmds::SimulateArgs),
    /// Fit parameters by gradient ascent on the exact marginal likelihood.
    Fit(cmds::FitArgs),
    /// Stream observations through the moving-horizon online learner and
    /// compare adapted against frozen parameters on a held-out forecast.
    Online(cmds::OnlineArgs),
    /// Deformation-field tools (exponentiate, warp, Jacobian determinant).
    #[command(subcommand)]
    Deform(cmds::DeformCmd),
    /// Evaluation metrics over MSEQ inputs.
    #[command(subcommand)]
    Metrics(cmds::MetricsCmd),
    /// Synthetic ground-truth experiments across seeds.
    #[command(subcommand)]
    Experiment(cmds::ExperimentCmd),
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmds::simulate(args),
        Command::Fit(args) => cmds::fit(args),
        Command::Online(args) => cmds::online(args),
        Command::Deform(cmd) => cmds::deform(cmd),
        Command::Metrics(cmd) => cmds::metrics(cmd),
        Command::Experiment(cmd) => cmds::experiment(cmd),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Io(_) | Error::Invalid(_) | Error::Dim(_) => 2,
        Error::Numeric(_) | Error::Diverged { .. } => 3,
        Error::Precondition(_) => 4,
    }
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("MOTIONSSM_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
