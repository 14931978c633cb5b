use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use comire::cli::{cmd_check, cmd_fit, cmd_risk, cmd_simulate, CheckArgs, FitArgs, RiskArgs, SimulateArgs};
use comire::ComireError;

/// Convex mixture regression for dose-response modeling: fit conditional
/// response densities, estimate additional risk and benchmark doses, and
/// check the fit with posterior predictive replicates.
#[derive(Parser)]
#[command(name = "comire", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario dataset with its generative truth.
    Simulate {
        /// Scenario id: 1 (convex mixture), 2 (drifting locations),
        /// 3 (dose-independent).
        scenario: u8,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the model to a dataset CSV and persist the posterior draws.
    Fit {
        /// Input CSV with `x,y` columns.
        data: PathBuf,
        /// Flat key-value config file overriding the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
        /// Drop rows with responses above this ceiling at ingestion.
        #[arg(long)]
        max_y: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior additional-risk curve and benchmark-dose table.
    Risk {
        /// Draws directory from `fit` (or a single draws file).
        draws: PathBuf,
        /// Response threshold a.
        #[arg(long, default_value_t = 37.0)]
        threshold: f64,
        /// Benchmark risk level; repeat for several rows.
        #[arg(long = "q")]
        q: Vec<f64>,
        /// Upper end of the dose grid (default: 99th percentile of the
        /// fitted doses).
        #[arg(long)]
        grid_max: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior predictive check and convergence diagnostics.
    Check {
        /// Draws directory from `fit` (or a single draws file).
        draws: PathBuf,
        /// Input CSV with `x,y` columns.
        data: PathBuf,
        #[arg(long, default_value_t = 37.0)]
        threshold: f64,
        #[arg(long, default_value_t = 50)]
        replicates: usize,
        /// Smoothing bandwidth (default: Silverman's rule on the doses).
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_y: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario, n, seed, out } => cmd_simulate(&SimulateArgs {
            scenario,
            n,
            seed,
            out,
        }),
        Command::Fit {
            data,
            config,
            seed,
            chains,
            iterations,
            burn_in,
            thin,
            max_y,
            out,
        } => cmd_fit(&FitArgs {
            data,
            config,
            seed,
            chains,
            iterations,
            burn_in,
            thin,
            max_y,
            out,
        })
        .map(|_| ()),
        Command::Risk {
            draws,
            threshold,
            q,
            grid_max,
            out,
        } => cmd_risk(&RiskArgs {
            draws,
            threshold,
            q,
            grid_max,
            out,
        }),
        Command::Check {
            draws,
            data,
            threshold,
            replicates,
            bandwidth,
            seed,
            max_y,
            out,
        } => cmd_check(&CheckArgs {
            draws,
            data,
            threshold,
            replicates,
            bandwidth,
            seed,
            max_y,
            out,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                ComireError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
