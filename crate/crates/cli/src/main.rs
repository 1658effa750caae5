//! `topopump` command-line interface.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;
use output::{Provenance, RunDir};

#[derive(Parser)]
#[command(name = "topopump", version, about = "Topological state transfer in generalized SSH chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; every field has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config value, e.g. `--set protocol.alpha=4.5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Master seed for disorder and loss draws.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Outputs do not depend on this.
    #[arg(long, global = true, env = "TOPOPUMP_JOBS")]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "topopump-out")]
    out: PathBuf,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Static and instantaneous spectra, gap-state density, minimum gaps, dispersion.
    Spectrum,
    /// Winding number at each configured (J1, J2) point.
    Winding,
    /// One time evolution with populations, final state and summary.
    Evolve,
    /// Fidelity curves, alpha phase diagrams, optimal alpha, size scaling.
    Sweep,
    /// Disorder or loss ensembles.
    Ensemble,
    /// Cubic fit of two columns of a CSV table.
    Fit,
    /// Router port populations and stabilization time versus branch count.
    Router,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Winding => "winding",
            Command::Evolve => "evolve",
            Command::Sweep => "sweep",
            Command::Ensemble => "ensemble",
            Command::Fit => "fit",
            Command::Router => "router",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.set, cli.seed)?;
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be >= 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;

    let mut dir = RunDir::create(&cli.out, Provenance::new(cli.command.name(), &cfg))?;
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &mut dir)?,
        Command::Winding => commands::winding(&cfg, &mut dir)?,
        Command::Evolve => commands::evolve_cmd(&cfg, &mut dir)?,
        Command::Sweep => commands::sweep(&cfg, &mut dir)?,
        Command::Ensemble => commands::ensemble(&cfg, &mut dir)?,
        Command::Fit => commands::fit(&cfg, &mut dir)?,
        Command::Router => commands::router(&cfg, &mut dir)?,
    }
    dir.finish(&cfg, jobs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("topopump: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
