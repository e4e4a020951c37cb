//! Input-side denoisers: posterior mean and variance of a signal component `x`
//! given a Gaussian pseudo-observation `r = x + N(0, v)` and the prior.
//!
//! The Bernoulli-Gaussian prior follows the normalization in which each
//! nonzero component has variance `1/lambda`, so the marginal signal variance
//! is 1 regardless of the sparsity rate. Its posterior is a two-component
//! mixture (spike at zero, conjugate slab); evidence weights are combined in
//! the log domain because the ratio of the two Gaussian likelihoods underflows
//! long before the moments become uninteresting.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    BernoulliGaussian,
    Gaussian,
    PointMass,
}

/// Prior over a single signal component, shared across components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    /// Sparsity rate in (0, 1]; only meaningful for `BernoulliGaussian`.
    pub lambda: f64,
    /// Mean of the Gaussian component (slab mean for Bernoulli-Gaussian).
    pub mean0: f64,
    /// Variance of the Gaussian component; `1/lambda` for Bernoulli-Gaussian.
    pub var0: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum PriorError {
    #[error("sparsity rate must lie in (0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("prior variance must be positive and finite, got {0}")]
    InvalidVar0(f64),
    #[error("pseudo variance must be positive, got {0}")]
    InvalidPseudoVar(f64),
    #[error("pseudo observation must be finite, got {0}")]
    InvalidPseudoObs(f64),
    #[error("sample count must be at least 1")]
    EmptySample,
}

/// Posterior moments plus the denoiser slope `d mean / d pseudo_obs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiserOutput {
    pub mean: f64,
    pub variance: f64,
    pub derivative: f64,
}

impl PriorSpec {
    /// Spike-and-slab prior: zero with probability `1 - lambda`, else
    /// `N(0, 1/lambda)` so the marginal variance is 1.
    pub fn bernoulli_gaussian(lambda: f64) -> Result<Self, PriorError> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(PriorError::InvalidLambda(lambda));
        }
        Ok(Self {
            kind: PriorKind::BernoulliGaussian,
            lambda,
            mean0: 0.0,
            var0: 1.0 / lambda,
        })
    }

    pub fn gaussian(mean0: f64, var0: f64) -> Result<Self, PriorError> {
        if !(var0 > 0.0 && var0.is_finite()) {
            return Err(PriorError::InvalidVar0(var0));
        }
        Ok(Self {
            kind: PriorKind::Gaussian,
            lambda: 1.0,
            mean0,
            var0,
        })
    }

    pub fn point_mass(value: f64) -> Self {
        Self {
            kind: PriorKind::PointMass,
            lambda: 1.0,
            mean0: value,
            var0: 0.0,
        }
    }

    /// Marginal prior mean, used to initialize the solvers.
    pub fn marginal_mean(&self) -> f64 {
        match self.kind {
            PriorKind::BernoulliGaussian => self.lambda * self.mean0,
            PriorKind::Gaussian | PriorKind::PointMass => self.mean0,
        }
    }

    /// Marginal prior variance, used to initialize the solvers.
    pub fn marginal_var(&self) -> f64 {
        match self.kind {
            PriorKind::BernoulliGaussian => {
                let m = self.marginal_mean();
                self.lambda * (self.var0 + self.mean0 * self.mean0) - m * m
            }
            PriorKind::Gaussian => self.var0,
            PriorKind::PointMass => 0.0,
        }
    }
}

/// Exact posterior moments of `x` under `spec`, observing
/// `pseudo_obs = x + N(0, pseudo_var)`.
pub fn prior_moments(
    spec: &PriorSpec,
    pseudo_obs: f64,
    pseudo_var: f64,
) -> Result<DenoiserOutput, PriorError> {
    if !(pseudo_var > 0.0) {
        return Err(PriorError::InvalidPseudoVar(pseudo_var));
    }
    if !pseudo_obs.is_finite() {
        return Err(PriorError::InvalidPseudoObs(pseudo_obs));
    }
    let out = match spec.kind {
        PriorKind::PointMass => DenoiserOutput {
            mean: spec.mean0,
            variance: 0.0,
            derivative: 0.0,
        },
        PriorKind::Gaussian => {
            let prec = 1.0 / spec.var0 + 1.0 / pseudo_var;
            let variance = 1.0 / prec;
            let mean = variance * (spec.mean0 / spec.var0 + pseudo_obs / pseudo_var);
            DenoiserOutput {
                mean,
                variance,
                derivative: variance / pseudo_var,
            }
        }
        PriorKind::BernoulliGaussian => {
            bg_moments(spec.lambda, spec.mean0, spec.var0, pseudo_obs, pseudo_var)
        }
    };
    Ok(out)
}

fn bg_moments(lambda: f64, mean0: f64, var0: f64, r: f64, v: f64) -> DenoiserOutput {
    // Slab posterior: conjugate Gaussian update.
    let vs = var0 * v / (var0 + v);
    let ms = (var0 * r + v * mean0) / (var0 + v);
    // Evidence of each mixture component, in the log domain.
    let lw_slab = lambda.ln() + normal::ln_pdf_scaled(r, mean0, var0 + v);
    let lw_spike = (1.0 - lambda).ln() + normal::ln_pdf_scaled(r, 0.0, v);
    // P(slab | r) = 1 / (1 + exp(lw_spike - lw_slab)); exp saturates safely.
    let pi_slab = 1.0 / (1.0 + (lw_spike - lw_slab).exp());
    let mean = pi_slab * ms;
    let second = pi_slab * (vs + ms * ms);
    let variance = (second - mean * mean).max(0.0);
    DenoiserOutput {
        mean,
        variance,
        derivative: variance / v,
    }
}

/// Draws `n` i.i.d. samples from the prior; deterministic given the seed.
pub fn prior_sample(spec: &PriorSpec, n: usize, seed: u64) -> Result<Vec<f64>, PriorError> {
    if n == 0 {
        return Err(PriorError::EmptySample);
    }
    if spec.kind == PriorKind::BernoulliGaussian && !(spec.lambda > 0.0 && spec.lambda <= 1.0) {
        return Err(PriorError::InvalidLambda(spec.lambda));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = match spec.kind {
        PriorKind::PointMass => vec![spec.mean0; n],
        PriorKind::Gaussian => {
            let dist = Normal::new(spec.mean0, spec.var0.sqrt())
                .map_err(|_| PriorError::InvalidVar0(spec.var0))?;
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
        PriorKind::BernoulliGaussian => {
            let dist = Normal::new(spec.mean0, spec.var0.sqrt())
                .map_err(|_| PriorError::InvalidVar0(spec.var0))?;
            (0..n)
                .map(|_| {
                    if rng.gen::<f64>() < spec.lambda {
                        dist.sample(&mut rng)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    };
    Ok(out)
}
