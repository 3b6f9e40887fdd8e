//! `landau-lab`: command-line front end of the Landau equation laboratory.

mod config;
mod decay;
mod output;
mod solve;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use landau_core::LabError;

use config::{Command, CommonArgs, DecayArgs, RunConfig, SolveArgs, VerifyArgs};
use output::RunDir;

const EXIT_VERDICT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INSUFFICIENT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "landau-lab",
    version,
    about = "Numerical laboratory for the homogeneous Landau equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check functional inequalities on a seeded corpus.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        verify: VerifyArgs,
    },
    /// Integrate from an initial datum and store the trajectory.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Fit moment envelopes and decay laws to a trajectory.
    Decay {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        decay: DecayArgs,
    },
}

fn resolve(cmd: Cmd) -> anyhow::Result<RunConfig> {
    let (none_v, none_s, none_d) = (VerifyArgs::default(), SolveArgs::default(), DecayArgs::default());
    match cmd {
        Cmd::Verify { common, verify } => RunConfig::resolve(Command::Verify, &common, &verify, &none_s, &none_d),
        Cmd::Solve { common, solve } => RunConfig::resolve(Command::Solve, &common, &none_v, &solve, &none_d),
        Cmd::Decay { common, solve, decay } => RunConfig::resolve(Command::Decay, &common, &none_v, &solve, &decay),
    }
}

fn execute(config: &RunConfig) -> anyhow::Result<bool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build_global()?;
    let dir = RunDir::create(config)?;
    let verdicts = match config.command {
        Command::Verify => verify::run(config, &dir)?,
        Command::Solve => solve::run(config, &dir)?,
        Command::Decay => decay::run(config, &dir)?,
    };
    Ok(verdicts.iter().all(|v| v.vacuous || v.holds))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<LabError>() {
        Some(LabError::InvalidConfig(_)) => EXIT_USAGE,
        Some(LabError::InsufficientData(_)) => EXIT_INSUFFICIENT,
        _ => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(cli.command).and_then(|config| execute(&config));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERDICT),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
