//! Command-line front end: run the simulation study, analyze an empirical
//! CSV, or inspect propensity weights. Exit codes: 0 success, 1 configuration
//! or input error, 2 runtime failure.

mod analyze_cmd;
mod manifest;
mod simulate_cmd;
mod weights_cmd;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "gboot",
    version,
    about = "Generalized bootstrap standard errors for IPTW causal-effect estimation"
)]
struct Cli {
    /// Master seed for all randomized work.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores). Results are identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output directory (created if absent).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte Carlo simulation study over a scenario grid.
    Simulate(SimulateArgs),
    /// Bootstrap a causal-effect estimate from a CSV dataset and emit a JSON
    /// report plus histogram tables.
    Analyze(AnalyzeArgs),
    /// Fit the propensity model of a CSV dataset and report weight
    /// diagnostics and resampling-probability summaries.
    Weights(WeightsArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario subset: n1000 | n5000 | n10000 | full.
    #[arg(long, alias = "grid", default_value = "n1000")]
    scenarios: String,

    /// Propensity-model specification: correct | mis | both.
    #[arg(long, default_value = "mis")]
    ps_spec: String,

    /// Simulated datasets per scenario.
    #[arg(long)]
    datasets: Option<usize>,

    /// Bootstrap replicates per method per dataset.
    #[arg(long)]
    bootstrap: Option<usize>,

    #[arg(long)]
    trim_threshold: Option<f64>,

    /// Refit the propensity model inside every bootstrap replicate.
    #[arg(long)]
    refit_ps: bool,

    /// JSON study configuration; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Calibrate the covariate model from an empirical CSV before simulating.
    #[arg(long)]
    calibrate: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SchemaArgs {
    /// Treatment column (0/1).
    #[arg(long, default_value = "catholic")]
    treatment_col: String,

    /// Outcome column.
    #[arg(long, default_value = "math12")]
    outcome_col: String,

    /// Continuous pretest covariate column.
    #[arg(long, default_value = "math8")]
    pretest_col: String,

    /// Ordinal income covariate column (categories 1-15; 13+ excluded).
    #[arg(long, default_value = "faminc8")]
    income_col: String,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,

    /// gb | ob | tb | all.
    #[arg(long, default_value = "all")]
    method: String,

    /// Bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,

    #[arg(long, default_value_t = 20.0)]
    trim_threshold: f64,

    /// Refit the propensity model inside every bootstrap replicate.
    #[arg(long)]
    refit_ps: bool,

    /// Also write each method's raw replicate estimates as one-column CSVs.
    #[arg(long)]
    dump_estimates: bool,

    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Debug, Args)]
struct WeightsArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,

    /// Oversized-weight threshold.
    #[arg(long, default_value_t = 20.0)]
    threshold: f64,

    #[command(flatten)]
    schema: SchemaArgs,
}

/// Errors split by exit code.
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn config(err: impl std::fmt::Display) -> Self {
        CliError::Config(err.to_string())
    }

    fn runtime(err: impl std::fmt::Display) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl SchemaArgs {
    fn to_schema(&self) -> gboot::analyze::EmpiricalSchema {
        gboot::analyze::EmpiricalSchema {
            treatment: self.treatment_col.clone(),
            outcome: self.outcome_col.clone(),
            pretest: self.pretest_col.clone(),
            income: self.income_col.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };

    let threads = cli.threads;
    let run = || dispatch(cli);
    let result = if threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(CliError::config(format!("cannot build thread pool: {e}"))),
        }
    } else {
        run()
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    let threads = cli.threads;
    let out = cli.out;
    match cli.command {
        Command::Simulate(args) => simulate_cmd::run(args, seed, threads, &out),
        Command::Analyze(args) => analyze_cmd::run(args, seed, threads, &out),
        Command::Weights(args) => weights_cmd::run(args, seed, threads, &out),
    }
}

fn ensure_out_dir(out: &std::path::Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::config(format!("cannot create output directory {out:?}: {e}")))
}

fn write_output(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {path:?}: {e}")))
}
