//! Problem generation and the reproduction harness: builds synthetic
//! clipped-compressed-sensing instances, sweeps (solver, SNR, seed) cells,
//! and writes per-iteration MSE trajectories to CSV together with a gnuplot
//! script for the comparison figure.

mod config;
mod harness;

pub use config::{config_to_toml, load_config, preset, save_config};
pub use harness::{run_experiment, ExperimentRun, CSV_HEADER};

use ndarray::{Array1, Array2};
use rand_chacha::{
    rand_core::{RngCore, SeedableRng},
    ChaCha8Rng,
};
use rand_distr::{Distribution, Normal};
use std::path::PathBuf;
use thiserror::Error;

use crate::channels::{channel_sample, ChannelSpec};
use crate::priors::{prior_sample, PriorSpec};
use crate::solvers::{ProblemInstance, SolverConfig, SolverError, SolverKind};

/// Edgewise runs above this side length are rejected unless explicitly
/// allowed; the per-edge mean panel alone is `8·M·N` bytes.
pub const EDGEWISE_SIZE_LIMIT: usize = 4000;

/// One experiment: a parameter grid over SNR and seeds, run for each selected
/// solver on identical instances.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    /// Sparsity rate of the Bernoulli-Gaussian signal prior.
    pub lambda: f64,
    /// Clipping threshold; `+inf` selects the plain AWGN channel.
    pub theta: f64,
    pub snr_db_list: Vec<f64>,
    pub solvers: Vec<SolverKind>,
    pub seeds: Vec<u64>,
    pub solver_config: SolverConfig,
    pub output_dir: PathBuf,
    /// Opt-in for edgewise runs beyond [`EDGEWISE_SIZE_LIMIT`].
    pub allow_large_edgewise: bool,
}

/// One CSV row: a single solver iteration inside one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRecord {
    pub solver: SolverKind,
    pub seed: u64,
    pub snr_db: f64,
    pub iter: usize,
    pub mse: f64,
    pub stop_metric: f64,
    /// Measured wall time of the owning cell, in milliseconds. Written as 0
    /// in the CSV so output files stay byte-reproducible; real timings go to
    /// the log.
    pub wall_ms: f64,
    pub diverged: bool,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    Validation(String),
    #[error("length mismatch: x_hat has {got}, x_true has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("config file error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |msg: String| Err(ExperimentError::Validation(msg));
        if self.m == 0 || self.n == 0 {
            return fail("m and n must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return fail(format!("lambda must lie in (0, 1], got {}", self.lambda));
        }
        if !(self.theta > 0.0) {
            return fail(format!(
                "theta must be positive (inf for awgn), got {}",
                self.theta
            ));
        }
        if self.snr_db_list.is_empty() {
            return fail("snr_db list must be nonempty".into());
        }
        if self.solvers.is_empty() {
            return fail("solver list must be nonempty".into());
        }
        if self.seeds.is_empty() {
            return fail("seed list must be nonempty".into());
        }
        if self.solvers.contains(&SolverKind::Amp) && self.theta.is_finite() {
            return fail("amp requires the awgn channel; set theta = inf".into());
        }
        if self.solvers.contains(&SolverKind::Epmpa)
            && self.m.max(self.n) > EDGEWISE_SIZE_LIMIT
            && !self.allow_large_edgewise
        {
            return fail(format!(
                "epmpa at m or n > {EDGEWISE_SIZE_LIMIT} needs O(M*N) memory; \
                 set allow_large_edgewise = true (or drop epmpa) to proceed"
            ));
        }
        self.solver_config.validate()?;
        Ok(())
    }

    pub fn channel_spec(&self, snr_db: f64) -> Result<ChannelSpec, ExperimentError> {
        let noise_var = noise_var_from_snr_db(snr_db);
        let spec = if self.theta.is_finite() {
            ChannelSpec::clipped_awgn(noise_var, self.theta)
        } else {
            ChannelSpec::awgn(noise_var)
        };
        spec.map_err(|e| ExperimentError::Validation(e.to_string()))
    }
}

/// Transmit SNR convention for a unit-variance signal: `sigma^2 = 10^(-snr/10)`.
pub fn noise_var_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Draws one synthetic instance. All randomness (matrix, signal, noise) is
/// derived deterministically from `seed`.
pub fn generate_problem(
    m: usize,
    n: usize,
    lambda: f64,
    theta: f64,
    snr_db: f64,
    seed: u64,
) -> Result<ProblemInstance, ExperimentError> {
    if m == 0 || n == 0 {
        return Err(ExperimentError::Validation(
            "m and n must be at least 1".into(),
        ));
    }
    let prior = PriorSpec::bernoulli_gaussian(lambda)
        .map_err(|e| ExperimentError::Validation(e.to_string()))?;
    if !(theta > 0.0) {
        return Err(ExperimentError::Validation(format!(
            "theta must be positive (inf for awgn), got {theta}"
        )));
    }
    let noise_var = noise_var_from_snr_db(snr_db);
    let channel = if theta.is_finite() {
        ChannelSpec::clipped_awgn(noise_var, theta)
    } else {
        ChannelSpec::awgn(noise_var)
    }
    .map_err(|e| ExperimentError::Validation(e.to_string()))?;

    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let seed_matrix = root.next_u64();
    let seed_signal = root.next_u64();
    let seed_noise = root.next_u64();

    let mut mat_rng = ChaCha8Rng::seed_from_u64(seed_matrix);
    let entry = Normal::new(0.0, (1.0 / m as f64).sqrt())
        .map_err(|e| ExperimentError::Validation(e.to_string()))?;
    let a = Array2::from_shape_fn((m, n), |_| entry.sample(&mut mat_rng));

    let x = Array1::from(
        prior_sample(&prior, n, seed_signal)
            .map_err(|e| ExperimentError::Validation(e.to_string()))?,
    );
    let z = a.dot(&x);
    let y = Array1::from(channel_sample(&channel, z.as_slice().unwrap(), seed_noise));

    Ok(ProblemInstance::new(a, y, prior, channel, Some(x))?)
}

/// Per-component mean squared error `(1/N) ||x_hat - x_true||^2`.
pub fn mse(x_hat: &[f64], x_true: &[f64]) -> Result<f64, ExperimentError> {
    if x_hat.len() != x_true.len() {
        return Err(ExperimentError::LengthMismatch {
            expected: x_true.len(),
            got: x_hat.len(),
        });
    }
    Ok(x_hat
        .iter()
        .zip(x_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x_true.len() as f64)
}
