// Reference constants are kept at full precision, and `!(x > 0)` is the
// NaN-rejecting form of the domain checks.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

//! Solvers for generalized linear measurement models `y ~ p(y | z)`, `z = A x`,
//! `x ~ p(x | q)`, built from scalar Gaussian message passing.
//!
//! The crate provides four iterative solvers behind one run interface — an
//! edgewise expectation-propagation message passing algorithm, its node-wise
//! GAMP reduction, a scalar-variance simplified GAMP, and AMP for additive
//! Gaussian noise — together with the input/output denoisers they share, a
//! brute-force quadrature oracle used by the test suite, and an experiment
//! harness that generates synthetic instances and writes per-iteration MSE
//! trajectories to CSV.

pub mod channels;
pub mod experiments;
pub mod messages;
pub mod normal;
pub mod oracle;
pub mod priors;
pub mod solvers;

pub use channels::{ChannelKind, ChannelMoments, ChannelSpec};
pub use experiments::{ExperimentConfig, ResultRecord};
pub use messages::GaussianMessage;
pub use priors::{DenoiserOutput, PriorKind, PriorSpec};
pub use solvers::{
    ProblemInstance, RunResult, SolverConfig, SolverKind, StopMetric, TrajectoryRecord,
};

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand_chacha::rand_core::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
