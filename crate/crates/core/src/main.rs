use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddsbm::experiment::{self, ExperimentConfig, FitOptions};
use ddsbm::Error;

/// Community detection with the diagonally dominant stochastic block model.
#[derive(Debug, Parser)]
#[command(name = "ddsbm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate seeded benchmark networks and a ground-truth manifest.
    Generate {
        #[command(flatten)]
        cell: CellArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one chain on an edge-list file and report posterior summaries.
    Fit {
        /// Edge-list file (`n <count>` header, then `i j` lines).
        input: PathBuf,
        #[command(flatten)]
        chain: ChainArgs,
        /// Chain seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report as JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the full trace dump to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run replicated simulations and aggregate bias, RMSE and mean ARI.
    Simulate {
        #[command(flatten)]
        cell: CellArgs,
        #[command(flatten)]
        chain: ChainArgs,
        /// Directory for results.csv and summary.csv; printed when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adjusted Rand index between two label files.
    Ari { left: PathBuf, right: PathBuf },
}

#[derive(Debug, Args)]
struct CellArgs {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark connectivity case (1-4).
    #[arg(long = "case")]
    case_id: Option<u32>,
    #[arg(long)]
    k0: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Master seed; replicate seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ChainArgs {
    /// Retained draws.
    #[arg(long)]
    keep: Option<usize>,
    /// Burn-in steps.
    #[arg(long)]
    burn: Option<usize>,
    /// Dominance gap.
    #[arg(long)]
    delta: Option<f64>,
    /// Largest admissible number of communities.
    #[arg(long)]
    kmax: Option<usize>,
    /// Poisson rate of the prior on K.
    #[arg(long)]
    lambda: Option<f64>,
}

fn build_config(cell: &CellArgs, chain: Option<&ChainArgs>) -> Result<ExperimentConfig, Error> {
    let mut c = match &cell.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    c.case_id = cell.case_id.unwrap_or(c.case_id);
    c.k0 = cell.k0.unwrap_or(c.k0);
    c.n = cell.n.unwrap_or(c.n);
    c.rho = cell.rho.unwrap_or(c.rho);
    c.replicates = cell.replicates.unwrap_or(c.replicates);
    c.master_seed = cell.seed.unwrap_or(c.master_seed);
    if let Some(chain) = chain {
        c.n_keep = chain.keep.unwrap_or(c.n_keep);
        c.n_burn = chain.burn.unwrap_or(c.n_burn);
        c.delta = chain.delta.or(c.delta);
        c.k_max = chain.kmax.or(c.k_max);
        c.lambda = chain.lambda.or(c.lambda);
    }
    Ok(c)
}

/// 2 for unreadable or malformed input, 1 for anything the caller asked for
/// wrongly.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Io { .. } | Error::DimensionMismatch { .. } | Error::Empty => 2,
        _ => 1,
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    experiment::write_text(path, text)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate { cell, out } => {
            let config = build_config(&cell, None)?;
            let paths = experiment::cmd_generate(&config, &out)?;
            println!("wrote {} networks and manifest.txt to {}", paths.len(), out.display());
        }
        Command::Fit { input, chain, seed, out, trace } => {
            let defaults = FitOptions::default();
            let options = FitOptions {
                n_keep: chain.keep.unwrap_or(defaults.n_keep),
                n_burn: chain.burn.unwrap_or(defaults.n_burn),
                seed: seed.unwrap_or(defaults.seed),
                delta: chain.delta,
                k_max: chain.kmax,
                lambda: chain.lambda,
            };
            let report = experiment::fit_file(&input, &options).map_err(|e| match e {
                Error::TooFewNodes { .. } => Error::Parse { line: 1, msg: e.to_string() },
                other => other,
            })?;
            print!("{}", report.render());
            if let Some(path) = out {
                write(&path, &report.to_json())?;
            }
            if let Some(path) = trace {
                write(&path, &report.trace.dump())?;
            }
        }
        Command::Simulate { cell, chain, out } => {
            let config = build_config(&cell, Some(&chain))?;
            let sim = experiment::cmd_simulate(&config)?;
            match out {
                Some(dir) => {
                    sim.write(&dir)?;
                    print!("{}", sim.summary_csv());
                }
                None => print!("{}\n{}", sim.results_csv(), sim.summary_csv()),
            }
        }
        Command::Ari { left, right } => {
            println!("{:.6}", experiment::cmd_ari(&left, &right)?);
        }
    }
    Ok(())
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
