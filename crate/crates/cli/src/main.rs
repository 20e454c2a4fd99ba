//! `lmscreen`: screen longitudinal covariates, run the simulation benchmark,
//! or measure selection stability by bootstrap.
//!
//! Exit status: 0 on success, 2 for usage, configuration or input errors,
//! 3 for numerical failures.

mod commands;
mod options;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;
use options::Options;

#[derive(Parser)]
#[command(name = "lmscreen", version, about = "Likelihood screening of longitudinal covariates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank every covariate of a long-format CSV file
    Screen(Options),
    /// Run the Monte-Carlo benchmark on a simulated design
    Simulate(Options),
    /// Count how often each covariate is selected over bootstrap resamples
    Bootstrap(Options),
}

fn run(command: Command) -> Result<(), CliError> {
    let (opts, action): (Options, fn(&Options) -> Result<(), CliError>) = match command {
        Command::Screen(o) => (o, commands::screen),
        Command::Simulate(o) => (o, commands::simulate),
        Command::Bootstrap(o) => (o, commands::bootstrap),
    };
    let opts = opts.resolve().map_err(CliError::Usage)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| action(&opts))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
