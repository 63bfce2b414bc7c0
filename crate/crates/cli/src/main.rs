//! `amprb`: batch front end for the added-mass/added-damping model problems.
//!
//! ```text
//! amprb [--config FILE] [--out DIR] [--format csv|json] [--workers N] [--seed S] \
//!       <group> <action> [--key value ...]
//! ```
//!
//! Exit status is 0 on success, 1 for configuration errors and 2 for
//! numerical failures; failures also leave `error.json` in the output directory.

#![allow(clippy::too_many_arguments)]

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::output::{Format, RunInfo};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<amprb::Error> for CliError {
    fn from(e: amprb::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "amprb", version, about = "Model problems and verification runs for added-mass partitioned FSI schemes")]
struct Cli {
    /// TOML file with one `[group.action]` table per experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Seed for randomized initial data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    group: Group,
}

/// Parameter overrides as `--key value`, after any global flags.
#[derive(Debug, Args)]
struct Params {
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "PARAMS")]
    rest: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum MpAm {
    /// Closed-form state and profiles.
    Exact(Params),
    /// AMP pressure boundary-value solve against the exact solution.
    Bvp(Params),
}

#[derive(Debug, Subcommand)]
enum MpAd {
    /// Time series of the predictor-corrector stepper.
    Simulate(Params),
    /// Measured growth factor over a (delta, beta_d) grid.
    Growth(Params),
}

#[derive(Debug, Subcommand)]
enum Stability {
    /// Unstable amplification factors at one parameter point.
    Roots(Params),
    /// Stable/unstable map over a (delta, beta_d) grid.
    Scan(Params),
    /// Continuation of a stability boundary.
    Boundary(Params),
}

#[derive(Debug, Subcommand)]
enum Tensors {
    /// Closed-form and discrete tensors of a sphere.
    Sphere(Params),
    /// Tensors of a sphere or of a surface read from CSV.
    Mesh(Params),
}

#[derive(Debug, Subcommand)]
enum Quadrature {
    /// Null-vector weights on one grid.
    Weights(Params),
    /// Annulus refinement study.
    Converge(Params),
}

#[derive(Debug, Subcommand)]
enum Collision {
    /// Body approaching a wall through the repulsion layer.
    Simulate(Params),
    /// Repulsion and damping profiles.
    Profiles(Params),
}

#[derive(Debug, Subcommand)]
enum Piston {
    /// Exact solution.
    Exact(Params),
    /// Stepper run against the exact solution.
    Simulate(Params),
    /// Errors and observed orders over a density sweep.
    Converge(Params),
}

#[derive(Debug, Subcommand)]
enum Group {
    /// Translating sphere in an inviscid shell.
    #[command(name = "mp-am", subcommand)]
    MpAm(MpAm),
    /// Rotating sphere in a viscous shell.
    #[command(name = "mp-ad", subcommand)]
    MpAd(MpAd),
    #[command(subcommand)]
    Stability(Stability),
    #[command(subcommand)]
    Tensors(Tensors),
    #[command(subcommand)]
    Quadrature(Quadrature),
    #[command(subcommand)]
    Collision(Collision),
    #[command(subcommand)]
    Piston(Piston),
}

impl Group {
    fn split(&self) -> (&'static str, &'static str, &Params) {
        match self {
            Group::MpAm(MpAm::Exact(p)) => ("mp-am", "exact", p),
            Group::MpAm(MpAm::Bvp(p)) => ("mp-am", "bvp", p),
            Group::MpAd(MpAd::Simulate(p)) => ("mp-ad", "simulate", p),
            Group::MpAd(MpAd::Growth(p)) => ("mp-ad", "growth", p),
            Group::Stability(Stability::Roots(p)) => ("stability", "roots", p),
            Group::Stability(Stability::Scan(p)) => ("stability", "scan", p),
            Group::Stability(Stability::Boundary(p)) => ("stability", "boundary", p),
            Group::Tensors(Tensors::Sphere(p)) => ("tensors", "sphere", p),
            Group::Tensors(Tensors::Mesh(p)) => ("tensors", "mesh", p),
            Group::Quadrature(Quadrature::Weights(p)) => ("quadrature", "weights", p),
            Group::Quadrature(Quadrature::Converge(p)) => ("quadrature", "converge", p),
            Group::Collision(Collision::Simulate(p)) => ("collision", "simulate", p),
            Group::Collision(Collision::Profiles(p)) => ("collision", "profiles", p),
            Group::Piston(Piston::Exact(p)) => ("piston", "exact", p),
            Group::Piston(Piston::Simulate(p)) => ("piston", "simulate", p),
            Group::Piston(Piston::Converge(p)) => ("piston", "converge", p),
        }
    }
}

fn execute(cli: &Cli, group: &str, action: &str, params: &Params) -> Result<(), CliError> {
    let file = cli.config.as_deref().map(config::load).transpose()?;
    let resolver = config::Resolver { group, action, file: file.as_ref(), overrides: config::parse_overrides(&params.rest)? };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cli.workers)))?;
    let (resolved, outcome) = pool.install(|| experiments::run(&resolver, cli.seed))?;
    let info = RunInfo { group, action, format: cli.format, seed: cli.seed };
    output::write_run(&cli.out, &info, resolved, &outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (group, action, params) = cli.group.split();
    match execute(&cli, group, action, params) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("amprb {group} {action}: {} error: {e}", e.kind());
            if let Err(w) = output::write_error(&cli.out, &format!("{group} {action}"), &e) {
                eprintln!("amprb: could not write error record: {w}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
