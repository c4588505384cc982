//! `graphon-osc` command-line front end.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::{render_keys, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "graphon-osc", version, about = "Oscillator networks on graphs and graphons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file; defaults apply to every missing key.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override a config value, e.g. `--set experiment.seed=7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory used when `output.dir` is not set.
    #[arg(long, env = "GRAPHON_OSC_OUTPUT_DIR", value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one finite network and write its trajectory.
    Simulate(RunArgs),
    /// Deterministic graphs against the continuum reference.
    Converge(RunArgs),
    /// Sampled graphs against the continuum reference.
    RandomConverge(RunArgs),
    /// Sampled graphs against the averaged system.
    AveragedGap(RunArgs),
    /// Monte Carlo scaling of the coupling fluctuation.
    MuScaling(RunArgs),
    /// Linearisation eigenvalues of a constant steady state.
    Spectrum(RunArgs),
    /// Spectral abscissa over a parameter grid.
    Sweep(RunArgs),
    /// Compare a simulated mode decay rate with the spectrum.
    DecayCheck(RunArgs),
}

impl Command {
    fn split(self) -> (&'static str, RunArgs) {
        match self {
            Command::Simulate(a) => ("simulate", a),
            Command::Converge(a) => ("converge", a),
            Command::RandomConverge(a) => ("random-converge", a),
            Command::AveragedGap(a) => ("averaged-gap", a),
            Command::MuScaling(a) => ("mu-scaling", a),
            Command::Spectrum(a) => ("spectrum", a),
            Command::Sweep(a) => ("sweep", a),
            Command::DecayCheck(a) => ("decay-check", a),
        }
    }
}

fn cli() -> clap::Command {
    commands::SUBCOMMANDS
        .iter()
        .fold(Cli::command(), |cmd, name| cmd.mut_subcommand(name, |c| c.after_help(render_keys(name))))
}

fn execute(name: &str, args: RunArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref(), &args.overrides)?;
    if args.print_config {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    let dir = cfg
        .output
        .dir
        .clone()
        .or(args.output_dir)
        .unwrap_or_else(|| PathBuf::from(commands::DEFAULT_OUTPUT_DIR));
    let start = Instant::now();
    let manifest = commands::run(name, &cfg, dir)?;
    eprintln!(
        "{name}: wrote {} in {:.2} s",
        manifest.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let parsed = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let (name, args) = parsed.command.split();
    match execute(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("graphon-osc {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
