//! Command-line front end: runs experiment grids from config files and emits
//! preset configurations.
//!
//! Exit codes: 0 on success, 2 on configuration or validation errors, 3 when
//! at least one grid cell hit the divergence guard (results are still
//! written). `GLM_MP_THREADS` caps how many grid cells run in parallel.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use glm_mp_core::experiments::{self, ExperimentError};
use glm_mp_core::SolverKind;

#[derive(Parser)]
#[command(
    name = "glm-mp",
    version,
    about = "Message-passing solvers for clipped and linear Gaussian measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid; flags override values from the config file.
    Run(RunArgs),
    /// Print (or write) a named preset configuration.
    GenConfig(GenConfigArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML; see `gen-config`).
    #[arg(long)]
    config: PathBuf,
    /// Rows of the measurement matrix.
    #[arg(long)]
    m: Option<usize>,
    /// Columns of the measurement matrix (signal length).
    #[arg(long)]
    n: Option<usize>,
    /// Sparsity rate of the Bernoulli-Gaussian prior, in (0, 1].
    #[arg(long)]
    lambda: Option<f64>,
    /// Clipping threshold; pass `inf` for the plain AWGN channel.
    #[arg(long)]
    theta: Option<f64>,
    /// SNR grid in dB, comma separated (e.g. `10,20,30`).
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    /// Solvers to run, comma separated: epmpa, gamp, gamp_simplified, amp.
    #[arg(long = "solver", value_delimiter = ',', value_parser = parse_solver)]
    solver: Option<Vec<SolverKind>>,
    /// Seeds, comma separated (e.g. `0,1,2`).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Iteration cap per solver run.
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Relative-change stopping threshold.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output directory for results.csv and plot.gp.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Permit edgewise (epmpa) runs beyond the default size guard.
    #[arg(long)]
    allow_large_edgewise: bool,
}

#[derive(Args)]
struct GenConfigArgs {
    /// Preset name; currently `fig3`.
    #[arg(long)]
    preset: String,
    /// Write to this path instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::GenConfig(args) => gen_config(args),
    }
}

fn run(args: RunArgs) -> ExitCode {
    let mut config = match experiments::load_config(&args.config) {
        Ok(c) => c,
        Err(e) => return fail_validation(&e.to_string()),
    };
    if let Some(m) = args.m {
        config.m = m;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(lambda) = args.lambda {
        config.lambda = lambda;
    }
    if let Some(theta) = args.theta {
        config.theta = theta;
    }
    if let Some(snr) = args.snr {
        config.snr_db_list = snr;
    }
    if let Some(solvers) = args.solver {
        config.solvers = solvers;
    }
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(max_iters) = args.max_iters {
        config.solver_config.max_iters = max_iters;
    }
    if let Some(epsilon) = args.epsilon {
        config.solver_config.epsilon = epsilon;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    if args.allow_large_edgewise {
        config.allow_large_edgewise = true;
    }

    match experiments::run_experiment(&config) {
        Ok(run) => {
            println!(
                "wrote {} ({} rows) and {}",
                config.output_dir.join("results.csv").display(),
                run.records.len(),
                config.output_dir.join("plot.gp").display()
            );
            if run.any_diverged() {
                for (solver, snr, seed) in &run.diverged_cells {
                    eprintln!("glm-mp: diverged cell solver={solver} snr_db={snr} seed={seed}");
                }
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ (ExperimentError::Validation(_) | ExperimentError::Config(_))) => {
            fail_validation(&e.to_string())
        }
        Err(e) => {
            eprintln!("glm-mp: {e}");
            ExitCode::FAILURE
        }
    }
}

fn gen_config(args: GenConfigArgs) -> ExitCode {
    let Some(config) = experiments::preset(&args.preset) else {
        return fail_validation(&format!(
            "unknown preset '{}' (available: fig3)",
            args.preset
        ));
    };
    match args.out {
        Some(path) => {
            if let Err(e) = experiments::save_config(&config, &path) {
                eprintln!("glm-mp: {e}");
                return ExitCode::FAILURE;
            }
            println!("wrote {}", path.display());
        }
        None => print!("{}", experiments::config_to_toml(&config)),
    }
    ExitCode::SUCCESS
}

fn fail_validation(msg: &str) -> ExitCode {
    eprintln!("glm-mp: {msg}");
    ExitCode::from(2)
}
