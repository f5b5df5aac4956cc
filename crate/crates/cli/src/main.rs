mod commands;
mod config;
mod csv;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CliError, CommonArgs, RunConfig, SweepArgs};

/// Two-impurity channel simulator: time evolution, pole tables, closed-form
/// predictions and figure datasets, all written as CSV.
#[derive(Parser, Debug)]
#[command(name = "qst-channel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Occupation probabilities `t,p_a,p_b,p_chan` starting from impurity A
    Simulate(CommonArgs),
    /// Real poles `omega,parity,residue_weight` of the impurity propagator
    Poles(CommonArgs),
    /// Regime classification and closed-form predictions, one row
    Predict(CommonArgs),
    /// Simulation against the applicable closed form; exit 4 unless the
    /// maximum deviation is below --tolerance
    Compare(CommonArgs),
    /// Peak transfer over a grid of (g, omega, n, l)
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Writes fig1.csv, fig2.csv, fig3.csv and fig3_fast.csv into --out
    Figures {
        #[command(flatten)]
        common: CommonArgs,
        /// Resolve the fast oscillation across the whole envelope grid
        #[arg(long)]
        dense: bool,
    },
}

type Action = fn(&RunConfig) -> Result<(), CliError>;

fn run(command: Command) -> Result<(), CliError> {
    let (cfg, action): (RunConfig, Action) = match &command {
        Command::Simulate(c) => (RunConfig::resolve(c, None, false)?, commands::simulate),
        Command::Poles(c) => (RunConfig::resolve(c, None, false)?, commands::poles),
        Command::Predict(c) => (RunConfig::resolve(c, None, false)?, commands::predict),
        Command::Compare(c) => (RunConfig::resolve(c, None, false)?, commands::compare),
        Command::Sweep { common, sweep } => (RunConfig::resolve(common, Some(sweep), false)?, commands::sweep),
        Command::Figures { common, dense } => (RunConfig::resolve(common, None, *dense)?, commands::figures),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
    pool.install(|| action(&cfg))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("qst-channel: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
