//! Output-side denoisers: posterior mean and variance of a noiseless
//! measurement `z` given the observation `y` and a Gaussian pseudo-prior
//! `z ~ N(z_pseudo, v_pseudo)`.
//!
//! Two likelihoods are supported: plain additive Gaussian noise, and the
//! saturating channel `y = Q(z) + n` where `Q` clips at `±theta`. The clipped
//! posterior decomposes over the three branches of `Q` into two truncated
//! Gaussians (observation explained by a saturated rail) and one interior
//! Gaussian product; branch weights are combined in the log domain so the
//! decomposition survives high-SNR settings where the raw weights underflow.

use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Awgn,
    ClippedAwgn,
}

/// Measurement likelihood `p(y | z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    /// Additive noise variance (sigma^2).
    pub noise_var: f64,
    /// Saturation threshold; `+inf` for the plain AWGN channel.
    pub clip_threshold: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("noise variance must be positive and finite, got {0}")]
    InvalidNoiseVar(f64),
    #[error("clip threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("pseudo variance must be positive, got {0}")]
    InvalidPseudoVar(f64),
    #[error("observation and pseudo mean must be finite, got y={y}, z_pseudo={z_pseudo}")]
    NonFiniteInput { y: f64, z_pseudo: f64 },
}

/// Posterior moments of `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelMoments {
    pub mean: f64,
    pub variance: f64,
}

impl ChannelSpec {
    pub fn awgn(noise_var: f64) -> Result<Self, ChannelError> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(ChannelError::InvalidNoiseVar(noise_var));
        }
        Ok(Self {
            kind: ChannelKind::Awgn,
            noise_var,
            clip_threshold: f64::INFINITY,
        })
    }

    pub fn clipped_awgn(noise_var: f64, clip_threshold: f64) -> Result<Self, ChannelError> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(ChannelError::InvalidNoiseVar(noise_var));
        }
        if !(clip_threshold > 0.0 && clip_threshold.is_finite()) {
            return Err(ChannelError::InvalidThreshold(clip_threshold));
        }
        Ok(Self {
            kind: ChannelKind::ClippedAwgn,
            noise_var,
            clip_threshold,
        })
    }
}

/// Symmetric saturation: `-theta` for `z <= -theta`, `z` inside, `theta` for
/// `z >= theta`.
#[inline]
pub fn clip(z: f64, theta: f64) -> f64 {
    debug_assert!(theta > 0.0);
    if z <= -theta {
        -theta
    } else if z >= theta {
        theta
    } else {
        z
    }
}

/// Posterior moments of `z` under `z ~ N(z_pseudo, v_pseudo)` and the
/// channel likelihood at observation `y`.
pub fn channel_moments(
    spec: &ChannelSpec,
    y: f64,
    z_pseudo: f64,
    v_pseudo: f64,
) -> Result<ChannelMoments, ChannelError> {
    if !(v_pseudo > 0.0) {
        return Err(ChannelError::InvalidPseudoVar(v_pseudo));
    }
    if !y.is_finite() || !z_pseudo.is_finite() {
        return Err(ChannelError::NonFiniteInput { y, z_pseudo });
    }
    match spec.kind {
        ChannelKind::Awgn => Ok(awgn_moments(spec.noise_var, y, z_pseudo, v_pseudo)),
        ChannelKind::ClippedAwgn => Ok(clipped_moments(
            spec.noise_var,
            spec.clip_threshold,
            y,
            z_pseudo,
            v_pseudo,
        )),
    }
}

fn awgn_moments(noise_var: f64, y: f64, z_pseudo: f64, v_pseudo: f64) -> ChannelMoments {
    let variance = 1.0 / (1.0 / noise_var + 1.0 / v_pseudo);
    let mean = variance * (y / noise_var + z_pseudo / v_pseudo);
    ChannelMoments { mean, variance }
}

fn clipped_moments(
    noise_var: f64,
    theta: f64,
    y: f64,
    z_pseudo: f64,
    v_pseudo: f64,
) -> ChannelMoments {
    // Branch z <= -theta: likelihood is constant N(y; -theta, sigma^2), the
    // conditional is the pseudo-prior truncated to the lower rail.
    let lower = normal::truncated_moments(z_pseudo, v_pseudo, f64::NEG_INFINITY, -theta);
    let lw_lower = normal::ln_pdf_scaled(y, -theta, noise_var) + lower.ln_mass;

    // Branch z >= theta.
    let upper = normal::truncated_moments(z_pseudo, v_pseudo, theta, f64::INFINITY);
    let lw_upper = normal::ln_pdf_scaled(y, theta, noise_var) + upper.ln_mass;

    // Interior branch: plain Gaussian product restricted to (-theta, theta).
    let interior = awgn_moments(noise_var, y, z_pseudo, v_pseudo);
    let mid = normal::truncated_moments(interior.mean, interior.variance, -theta, theta);
    let lw_mid = normal::ln_pdf_scaled(y, z_pseudo, noise_var + v_pseudo) + mid.ln_mass;

    let max_lw = lw_lower.max(lw_mid).max(lw_upper);
    let w_lower = (lw_lower - max_lw).exp();
    let w_mid = (lw_mid - max_lw).exp();
    let w_upper = (lw_upper - max_lw).exp();
    let z = w_lower + w_mid + w_upper;

    let mean = (w_lower * lower.mean + w_mid * mid.mean + w_upper * upper.mean) / z;
    // Centered combination keeps the variance accurate when the branch means
    // are far from zero.
    let spread = |m: f64, v: f64, w: f64| w * (v + (m - mean) * (m - mean));
    let variance = (spread(lower.mean, lower.var, w_lower)
        + spread(mid.mean, mid.var, w_mid)
        + spread(upper.mean, upper.var, w_upper))
        / z;
    ChannelMoments {
        mean,
        variance: variance.max(0.0),
    }
}

/// First and (negated, normalized) second derivative statistics of the
/// channel log-partition used by the node-wise solvers:
/// `l' = (E{z|..} - z_pseudo)/v_pseudo`, `l'' = (1 - var{z|..}/v_pseudo)/v_pseudo`.
pub fn l_stats(
    spec: &ChannelSpec,
    y: f64,
    z_pseudo: f64,
    v_pseudo: f64,
) -> Result<(f64, f64), ChannelError> {
    let m = channel_moments(spec, y, z_pseudo, v_pseudo)?;
    let l_prime = (m.mean - z_pseudo) / v_pseudo;
    let l_doubleprime = (1.0 - m.variance / v_pseudo) / v_pseudo;
    Ok((l_prime, l_doubleprime))
}

/// Pushes a clean measurement vector through the channel:
/// `y_m = Q(z_m) + N(0, noise_var)`, with `Q` the identity for AWGN.
/// Deterministic given the seed.
pub fn channel_sample(spec: &ChannelSpec, z: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_var.sqrt()).expect("validated at construction");
    z.iter()
        .map(|&zi| {
            let q = match spec.kind {
                ChannelKind::Awgn => zi,
                ChannelKind::ClippedAwgn => clip(zi, spec.clip_threshold),
            };
            q + noise.sample(&mut rng)
        })
        .collect()
}
