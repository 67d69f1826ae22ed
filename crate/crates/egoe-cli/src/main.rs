use clap::{Parser, Subcommand};

use egoe_cli::commands::{cmd_analytic, cmd_density, cmd_moments, cmd_survival};
use egoe_cli::config::{CliOpts, RunConfig};
use egoe_cli::CliError;

/// EGOE(1+k) ensemble simulator: eigenvalue densities, trace moments, and
/// post-quench survival probabilities for fermions with k-body interactions.
#[derive(Parser)]
#[command(name = "egoe", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form moment and variance table (no sampling)
    Analytic(CliOpts),
    /// Ensemble-averaged eigenvalue density vs ED-Gaussian and semicircle
    Density(CliOpts),
    /// Monte Carlo moments vs the closed forms
    Moments(CliOpts),
    /// Ensemble-averaged survival probability vs Gaussian and Bessel laws
    Survival(CliOpts),
}

type CommandFn = fn(&RunConfig) -> Result<(), CliError>;

fn run() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap's rendered message, but with the usage exit code contract
        let _ = e.print();
        CliError::Usage(String::new())
    })?;

    let (opts, default_k, f): (&CliOpts, &[u32], CommandFn) = match &cli.command {
        Command::Analytic(o) => (o, &[1, 2, 3, 4, 5], cmd_analytic),
        Command::Density(o) => (o, &[1, 2, 3, 4, 5], cmd_density),
        Command::Moments(o) => (o, &[1, 2, 3, 4, 5], cmd_moments),
        Command::Survival(o) => (o, &[2, 3, 4, 5], cmd_survival),
    };
    let config = RunConfig::resolve(opts, default_k)?;

    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| f(&config))
    } else {
        f(&config)
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(e) => {
            // empty Usage means clap already printed its own message
            if !matches!(&e, CliError::Usage(m) if m.is_empty()) {
                eprintln!("{e}");
            }
            std::process::exit(e.exit_code());
        }
    }
}
