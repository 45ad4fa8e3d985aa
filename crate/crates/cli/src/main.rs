mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weaksym::error::Error;

#[derive(Parser, Debug)]
#[command(name = "weaksym", version, about = "Isogeometric mixed elasticity with weakly imposed stress symmetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized probes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Use equal-degree spaces instead of the de Rham based ones.
    #[arg(long, global = true)]
    naive_spaces: bool,
    /// Worker threads for the parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Quadrature rule: "default" or "minimal" (max degree + 1 points).
    #[arg(long, global = true)]
    quadrature: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Error table and rates for a manufactured case.
    Convergence,
    /// Cook membrane probe trajectory.
    Cook,
    /// Structural probes, written as JSON.
    Verify,
    /// Field export as legacy VTK.
    ExportVtk,
    /// Discrete inf-sup constants over a mesh sequence.
    Infsup,
}

pub struct Context {
    pub config: Option<config::ExperimentConfig>,
    pub out: PathBuf,
    pub seed: u64,
    pub naive: bool,
    pub quadrature: Option<String>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Error(Error),
    ProbeFailed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Error(Error::NonConvergence { .. } | Error::LinearAlgebra(_)) => 2,
            Failure::Error(Error::Io(_)) => 4,
            Failure::Error(_) => 1,
            Failure::ProbeFailed(_) => 3,
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        weaksym::par::init_threads(t);
    }
    let config = cli.config.as_deref().map(config::load).transpose()?;
    let ctx = Context {
        config,
        out: cli.out.clone(),
        seed: cli.seed,
        naive: cli.naive_spaces,
        quadrature: cli.quadrature.clone(),
    };
    std::fs::create_dir_all(&ctx.out).map_err(Error::from)?;
    match cli.command {
        Command::Convergence => commands::convergence(&ctx),
        Command::Cook => commands::cook(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::ExportVtk => commands::export_vtk(&ctx),
        Command::Infsup => commands::infsup(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Error(e) => eprintln!("error: {e}"),
                Failure::ProbeFailed(msg) => eprintln!("probe failure: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
