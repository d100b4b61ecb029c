//! `probcon`: invert probabilistic constraints, fit constrained estimators
//! and run the synthetic experiments from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod estimate;
mod experiment;
mod invert;
mod io;
mod oracle;

#[derive(Debug, Parser)]
#[command(name = "probcon", version, about = "Estimation under probabilistic parameter constraints")]
struct Cli {
    /// JSON input for the subcommand (hyperparameters, experiment spec, ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// How Dirichlet constraint probabilities are evaluated.
    #[arg(long, global = true, value_enum)]
    method: Option<Method>,
    /// Worker threads for experiments.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Edgeworth1,
    Edgeworth2,
    Exact,
    Mc,
}

impl Method {
    /// The deterministic evaluator, or a usage error for Monte Carlo.
    fn deterministic(self, context: &str) -> anyhow::Result<probcon::ProbabilityMethod> {
        use probcon::ProbabilityMethod as P;
        Ok(match self {
            Method::Edgeworth1 => P::Edgeworth1,
            Method::Edgeworth2 => P::Edgeworth2,
            Method::Exact => P::Exact,
            Method::Mc => {
                return Err(probcon::Error::Unsupported(format!("--method mc is not available for {context}")).into())
            }
        })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Probability, margin and membership of a hyperparameter for one constraint.
    Invert(invert::InvertArgs),
    /// Fit an estimator to data read from JSON files.
    Estimate(estimate::EstimateArgs),
    /// Run a built-in or configured synthetic experiment and write CSV.
    Experiment(experiment::ExperimentArgs),
    /// Cross-check the probability evaluators on random instances.
    Oracle(oracle::OracleArgs),
}

/// Global flags shared by every subcommand.
pub(crate) struct Globals {
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    method: Option<Method>,
    jobs: Option<usize>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<probcon::Error>() {
        Some(e) => e.exit_code() as u8,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let globals = Globals {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        method: cli.method,
        jobs: cli.jobs,
    };
    let result = match cli.command {
        Command::Invert(args) => invert::run(args, &globals),
        Command::Estimate(args) => estimate::run(args, &globals),
        Command::Experiment(args) => experiment::run(args, &globals),
        Command::Oracle(args) => oracle::run(args, &globals),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("probcon: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
