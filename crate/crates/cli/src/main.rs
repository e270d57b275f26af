//! `funreg` — nonparametric functional regression workbench.
//!
//! Subcommands: `simulate` (sequence generators and coupled copies),
//! `estimate` (one regression estimate from CSV data), `orlicz` (norm
//! estimation from a sample file), `smallball` (small-ball curves and
//! concentration checks), and `ratebench` (Monte Carlo rate experiments).
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
//! failure. Seeds are mandatory everywhere; results are bitwise reproducible
//! for a given config and seed, independent of worker count.

mod commands;
mod config;
mod errors;
mod manifest;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use errors::CliResult;

#[derive(Parser)]
#[command(name = "funreg", version, about = "Nonparametric functional regression workbench")]
struct Cli {
    /// Worker threads for replication-parallel commands (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a covariate/noise sequence, optionally with coupled copies.
    Simulate(commands::simulate::SimulateArgs),
    /// Run one regression estimate on CSV covariates and responses.
    Estimate(commands::estimate::EstimateArgs),
    /// Estimate the Orlicz norm of a sample file.
    Orlicz(commands::orlicz::OrliczArgs),
    /// Small-ball probability curves and concentration checks.
    Smallball(commands::smallball::SmallballArgs),
    /// Monte Carlo convergence-rate experiments.
    Ratebench(commands::ratebench::RatebenchArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Estimate(args) => commands::estimate::run(args),
        Command::Orlicz(args) => commands::orlicz::run(args),
        Command::Smallball(args) => commands::smallball::run(args),
        Command::Ratebench(args) => commands::ratebench::run(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            std::process::exit(0);
        }
        Err(err) => {
            eprint!("{err}");
            std::process::exit(1);
        }
    };

    let threads = cli.threads;
    let outcome = match threads {
        Some(t) if t > 0 => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build();
            match pool {
                Ok(pool) => pool.install(|| run(cli)),
                Err(e) => {
                    eprintln!("error: cannot build thread pool: {e}");
                    std::process::exit(1);
                }
            }
        }
        _ => run(cli),
    };

    if let Err(err) = outcome {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
