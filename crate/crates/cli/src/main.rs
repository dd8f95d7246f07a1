//! `hybridbvp`: batch front end for the coupled solver, the single-equation
//! solvers, the assumption checks, the Poincaré constant and the engine demos.
//!
//! Exit codes: 0 success, 1 non-convergence, 2 failed assumption check,
//! 3 configuration or parse error.

mod commands;
mod io;
mod sandbox;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hybridbvp::Error;

#[derive(Parser, Debug)]
#[command(name = "hybridbvp", version, about = "Coupled p-Laplacian / nonlocal q-Laplacian boundary value solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the coupled system.
    Solve(SolveArgs),
    /// Solve the first equation for a fixed v read from a CSV file.
    SolveP(SolvePArgs),
    /// Solve the second equation for a fixed u read from a CSV file.
    SolveQ(SolveQArgs),
    /// Run the assumption verifiers and compute the invariant radius.
    Check(CheckArgs),
    /// Discrete Poincaré constant λ_p.
    Eigen(EigenArgs),
    /// Small demos of the finite-dimensional engine.
    Sandbox(SandboxArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// Registry problem name.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub problem: Option<String>,
    /// Problem JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_cells: Option<usize>,
    /// Overrides the outer (solve, solve-q) or inner (solve-p) tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed of the sampled verifiers.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(short, long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Solve even when assumption checks fail or no radius is certified.
    #[arg(long)]
    pub force: bool,
    /// Iterate T(u, ·) to a fixed point inside every outer step.
    #[arg(long)]
    pub nested_inner: bool,
}

#[derive(Args, Debug)]
pub struct SolvePArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// CSV with columns t and v (a solution.csv works).
    #[arg(long)]
    pub v: PathBuf,
}

#[derive(Args, Debug)]
pub struct SolveQArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// CSV with columns t and u (a solution.csv works).
    #[arg(long)]
    pub u: PathBuf,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Also write report.json to the output directory.
    #[arg(long)]
    pub write: bool,
}

#[derive(Args, Debug)]
pub struct EigenArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1024)]
    pub n_cells: usize,
    /// Seed of the descent restarts (p ≠ 2).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Write report.json and eigenfunction.csv here.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SandboxArgs {
    #[arg(value_enum)]
    pub demo: sandbox::Demo,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Write report.json here.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    Solver(Error),
    /// Files, CSV and JSON problems.
    Input(String),
    /// The run finished but did not meet its acceptance checks.
    NotConverged(String),
    /// Checks ran and at least one failed.
    ChecksFailed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::NotConverged(_) => 1,
            Failure::ChecksFailed(_) => 2,
            Failure::Input(_) => 3,
            Failure::Solver(e) => match e {
                Error::NonConvergence { .. } | Error::Stage { .. } | Error::Inconsistent(_) => 1,
                Error::Assumption(_) | Error::InvarianceViolation { .. } => 2,
                Error::Config(_) | Error::Parse(_) | Error::InvalidArgument(_) | Error::Eval { .. } => 3,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Solver(e) => e.to_string(),
            Failure::Input(m) | Failure::NotConverged(m) | Failure::ChecksFailed(m) => m.clone(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HYBRIDBVP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Solve(a) => commands::solve(&a),
        Command::SolveP(a) => commands::solve_p(&a),
        Command::SolveQ(a) => commands::solve_q(&a),
        Command::Check(a) => commands::check(&a),
        Command::Eigen(a) => commands::eigen(&a),
        Command::Sandbox(a) => sandbox::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
