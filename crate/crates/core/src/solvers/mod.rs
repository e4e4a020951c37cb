//! Iterative solvers for the generalized linear measurement model, behind one
//! common run interface: an edgewise EP message passing algorithm, its
//! node-wise MMSE reduction (GAMP), a scalar-variance simplification, and AMP
//! for the plain Gaussian channel.
//!
//! All four share the same stopping rule, the same denoisers, and the same
//! trajectory recording, so their per-iteration MSE curves are directly
//! comparable. Solvers never read `x_true`; it is carried only so MSE can be
//! recorded.

mod amp;
mod epmpa;
mod gamp;
mod gamp_simplified;

pub use amp::amp_run;
pub use epmpa::epmpa_run;
pub use gamp::gamp_run;
pub use gamp_simplified::gamp_simplified_run;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{ChannelError, ChannelSpec};
use crate::priors::{PriorError, PriorSpec};

/// One synthetic inference problem: measurements, model, and (for evaluation
/// only) the ground-truth signal.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    /// Dense measurement matrix, M x N.
    pub a: Array2<f64>,
    /// Elementwise squares of `a`, precomputed once.
    pub a_sq: Array2<f64>,
    /// Observations, length M.
    pub y: Array1<f64>,
    pub prior: PriorSpec,
    pub channel: ChannelSpec,
    /// Ground truth, length N; read only by MSE recording, never by solvers.
    pub x_true: Option<Array1<f64>>,
}

impl ProblemInstance {
    pub fn new(
        a: Array2<f64>,
        y: Array1<f64>,
        prior: PriorSpec,
        channel: ChannelSpec,
        x_true: Option<Array1<f64>>,
    ) -> Result<Self, SolverError> {
        let (m, n) = a.dim();
        if y.len() != m {
            return Err(SolverError::DimensionMismatch {
                what: "y",
                expected: m,
                got: y.len(),
            });
        }
        if let Some(x) = &x_true {
            if x.len() != n {
                return Err(SolverError::DimensionMismatch {
                    what: "x_true",
                    expected: n,
                    got: x.len(),
                });
            }
        }
        let a_sq = a.mapv(|v| v * v);
        Ok(Self {
            a,
            a_sq,
            y,
            prior,
            channel,
            x_true,
        })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }
}

/// Which vector the relative-change stopping rule inspects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopMetric {
    /// Per-solver convention: the node pseudo-observation aggregate for the
    /// edgewise solver, the posterior estimate for the node-wise ones.
    #[default]
    SolverDefault,
    /// Always use the pseudo-observation vector.
    PseudoObservation,
    /// Always use the posterior-mean estimate.
    Estimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative-change stopping threshold.
    pub epsilon: f64,
    pub max_iters: usize,
    pub variance_floor: f64,
    pub variance_cap: f64,
    /// Convex-combination factor on mean updates; 1 disables damping.
    pub damping: f64,
    pub record_trajectory: bool,
    pub stop_metric: StopMetric,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iters: 50,
            variance_floor: 1e-12,
            variance_cap: 1e6,
            damping: 1.0,
            record_trajectory: true,
            stop_metric: StopMetric::SolverDefault,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.epsilon > 0.0) {
            return Err(SolverError::InvalidConfig("epsilon must be positive"));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig("max_iters must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolverError::InvalidConfig("damping must lie in (0, 1]"));
        }
        if !(self.variance_floor > 0.0 && self.variance_cap >= self.variance_floor) {
            return Err(SolverError::InvalidConfig(
                "variance bounds must satisfy 0 < floor <= cap",
            ));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord {
    /// 1-based iteration index.
    pub iter: usize,
    /// `(1/N) ||x_hat - x_true||^2`, when ground truth is available.
    pub mse: Option<f64>,
    /// Average denoiser output variance this iteration.
    pub mean_v_x: f64,
    /// Average measurement-side pseudo variance this iteration.
    pub mean_v_s: f64,
    /// Relative-change value the stopping rule saw.
    pub stop_metric: f64,
    /// Edgewise solver only: `max_n` of (denoiser output variance minus its
    /// input pseudo variance); positive values mean the variance ordering
    /// was violated at some component this iteration.
    pub denoiser_var_excess: Option<f64>,
    /// AMP only, iterations >= 2: |Onsager coefficient from the averaged
    /// denoiser slope minus the variance-ratio route|.
    pub onsager_gap: Option<f64>,
}

/// Output of one solver run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub x_hat: Array1<f64>,
    pub z_hat: Array1<f64>,
    pub iterations_run: usize,
    pub trajectory: Vec<TrajectoryRecord>,
    pub converged: bool,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("prior moment evaluation failed at iteration {iteration}: {source}")]
    Prior {
        iteration: usize,
        source: PriorError,
    },
    #[error("channel moment evaluation failed at iteration {iteration}: {source}")]
    Channel {
        iteration: usize,
        source: ChannelError,
    },
    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: &'static str,
        /// Trajectory up to the last finite iterate.
        partial: Box<RunResult>,
    },
    #[error("channel kind not supported by this solver: {0}")]
    UnsupportedChannel(&'static str),
}

/// Solver selector used by the experiment harness and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Epmpa,
    Gamp,
    GampSimplified,
    Amp,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Epmpa,
        SolverKind::Gamp,
        SolverKind::GampSimplified,
        SolverKind::Amp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Epmpa => "epmpa",
            SolverKind::Gamp => "gamp",
            SolverKind::GampSimplified => "gamp_simplified",
            SolverKind::Amp => "amp",
        }
    }

    pub fn run(
        &self,
        problem: &ProblemInstance,
        config: &SolverConfig,
    ) -> Result<RunResult, SolverError> {
        match self {
            SolverKind::Epmpa => epmpa_run(problem, config),
            SolverKind::Gamp => gamp_run(problem, config),
            SolverKind::GampSimplified => gamp_simplified_run(problem, config),
            SolverKind::Amp => amp_run(problem, config),
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "epmpa" => Ok(SolverKind::Epmpa),
            "gamp" => Ok(SolverKind::Gamp),
            "gamp_simplified" => Ok(SolverKind::GampSimplified),
            "amp" => Ok(SolverKind::Amp),
            other => Err(format!(
                "unknown solver '{other}' (expected epmpa, gamp, gamp_simplified or amp)"
            )),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Relative-change stopping rule: stop once
/// `sum |now - prev| <= epsilon * sum |now|`. An all-zero `now` stops.
pub fn stop_check(now: &[f64], prev: &[f64], epsilon: f64) -> bool {
    debug_assert_eq!(now.len(), prev.len());
    let (delta, scale) = stop_sums(now, prev);
    if scale == 0.0 {
        return true;
    }
    delta <= epsilon * scale
}

/// The quantity the stopping rule compares against epsilon:
/// `sum |now - prev| / sum |now|` (0 when `now` is identically zero).
pub fn stop_metric_value(now: &[f64], prev: &[f64]) -> f64 {
    let (delta, scale) = stop_sums(now, prev);
    if scale == 0.0 {
        0.0
    } else {
        delta / scale
    }
}

fn stop_sums(now: &[f64], prev: &[f64]) -> (f64, f64) {
    let mut delta = 0.0;
    let mut scale = 0.0;
    for (&a, &b) in now.iter().zip(prev) {
        delta += (a - b).abs();
        scale += a.abs();
    }
    (delta, scale)
}

/// `(1/N) sum (x_hat - x_true)^2` against an optional ground truth.
pub(crate) fn mse_opt(x_hat: &Array1<f64>, x_true: Option<&Array1<f64>>) -> Option<f64> {
    x_true.map(|t| {
        x_hat
            .iter()
            .zip(t.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / t.len() as f64
    })
}

/// Builds the divergence error carrying the trajectory up to the last finite
/// iterate.
pub(crate) fn diverged(
    iteration: usize,
    reason: &'static str,
    x_hat: &Array1<f64>,
    z_hat: &Array1<f64>,
    trajectory: Vec<TrajectoryRecord>,
) -> SolverError {
    let iterations_run = trajectory.last().map(|r| r.iter).unwrap_or(0);
    SolverError::Diverged {
        iteration,
        reason,
        partial: Box::new(RunResult {
            x_hat: x_hat.clone(),
            z_hat: z_hat.clone(),
            iterations_run,
            trajectory,
            converged: false,
        }),
    }
}

/// Matrix-transpose-vector product accumulated row by row, so a row-major
/// matrix is walked contiguously.
pub(crate) fn gemv_t(a: &Array2<f64>, v: &Array1<f64>) -> Array1<f64> {
    let (m, n) = a.dim();
    debug_assert_eq!(v.len(), m);
    let mut out = Array1::<f64>::zeros(n);
    let out_s = out.as_slice_mut().expect("contiguous");
    for i in 0..m {
        let w = v[i];
        if w == 0.0 {
            continue;
        }
        let row = a.row(i);
        let row_s = row.as_slice().expect("row-major");
        for (o, &aij) in out_s.iter_mut().zip(row_s) {
            *o += w * aij;
        }
    }
    out
}
