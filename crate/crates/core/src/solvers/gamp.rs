//! Node-wise MMSE reduction of the edgewise schedule: per-measurement scalar
//! statistics `L'` and `L''` replace the M x N message panels, giving O(M+N)
//! state and two matrix-vector products per iteration.

use ndarray::Array1;

use super::{
    gemv_t, mse_opt, stop_check, stop_metric_value, ProblemInstance, RunResult, SolverConfig,
    SolverError, StopMetric, TrajectoryRecord,
};
use crate::channels::channel_moments;
use crate::messages::sanitize_variance;
use crate::priors::prior_moments;

pub fn gamp_run(
    problem: &ProblemInstance,
    config: &SolverConfig,
) -> Result<RunResult, SolverError> {
    config.validate()?;
    let (m, n) = problem.a.dim();
    let (floor, cap) = (config.variance_floor, config.variance_cap);
    let a = &problem.a;
    let a_sq = &problem.a_sq;

    let prior_mean = problem.prior.marginal_mean();
    let prior_var = problem.prior.marginal_var().clamp(floor, cap);
    let mut x_hat = Array1::<f64>::from_elem(n, prior_mean);
    let mut v_hat_x = Array1::<f64>::from_elem(n, prior_var);
    let mut l_prime_prev = Array1::<f64>::zeros(m);
    let mut l_prime = Array1::<f64>::zeros(m);
    let mut l_dprime = Array1::<f64>::zeros(m);
    let mut z_post = Array1::<f64>::zeros(m);

    let mut x_hat_prev = x_hat.clone();
    let mut x_v_prev = Array1::<f64>::zeros(n);
    let mut x_hat_last_finite = x_hat.clone();
    let mut z_post_last_finite = z_post.clone();

    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;

    for t in 1..=config.max_iters {
        iterations = t;

        // Measurement side: pseudo-prior with the previous iteration's
        // residual correction, then the channel statistics.
        let v_s = a_sq.dot(&v_hat_x).mapv(|v| v.max(floor));
        let mut z_s = a.dot(&x_hat);
        for i in 0..m {
            z_s[i] -= v_s[i] * l_prime_prev[i];
        }
        if !z_s.iter().all(|v| v.is_finite()) {
            return Err(super::diverged(
                t,
                "non-finite measurement pseudo-prior",
                &x_hat_last_finite,
                &z_post_last_finite,
                trajectory,
            ));
        }
        for i in 0..m {
            let mom = channel_moments(&problem.channel, problem.y[i], z_s[i], v_s[i]).map_err(
                |source| SolverError::Channel {
                    iteration: t,
                    source,
                },
            )?;
            z_post[i] = mom.mean;
            l_prime[i] = (mom.mean - z_s[i]) / v_s[i];
            l_dprime[i] = (1.0 - mom.variance / v_s[i]) / v_s[i];
        }

        // Signal side: aggregate the scalar statistics through the matrix.
        let prec = gemv_t(a_sq, &l_dprime);
        let v_v = prec.mapv(|p| sanitize_variance(1.0 / p, floor, cap));
        let corr = gemv_t(a, &l_prime);
        let mut x_v = x_hat.clone();
        for j in 0..n {
            x_v[j] += v_v[j] * corr[j];
        }
        if !x_v.iter().all(|v| v.is_finite()) {
            return Err(super::diverged(
                t,
                "non-finite pseudo-observation",
                &x_hat_last_finite,
                &z_post_last_finite,
                trajectory,
            ));
        }

        for j in 0..n {
            let d = prior_moments(&problem.prior, x_v[j], v_v[j]).map_err(|source| {
                SolverError::Prior {
                    iteration: t,
                    source,
                }
            })?;
            let new = if config.damping < 1.0 {
                config.damping * d.mean + (1.0 - config.damping) * x_hat[j]
            } else {
                d.mean
            };
            x_hat[j] = new;
            v_hat_x[j] = d.variance.clamp(floor, cap);
        }
        if !x_hat.iter().all(|v| v.is_finite()) {
            return Err(super::diverged(
                t,
                "non-finite posterior estimate",
                &x_hat_last_finite,
                &z_post_last_finite,
                trajectory,
            ));
        }

        let (now, prev): (&Array1<f64>, &Array1<f64>) = match config.stop_metric {
            StopMetric::PseudoObservation => (&x_v, &x_v_prev),
            _ => (&x_hat, &x_hat_prev),
        };
        let metric = stop_metric_value(now.as_slice().unwrap(), prev.as_slice().unwrap());
        let stop = stop_check(
            now.as_slice().unwrap(),
            prev.as_slice().unwrap(),
            config.epsilon,
        );

        if config.record_trajectory {
            trajectory.push(TrajectoryRecord {
                iter: t,
                mse: mse_opt(&x_hat, problem.x_true.as_ref()),
                mean_v_x: v_hat_x.mean().unwrap_or(0.0),
                mean_v_s: v_s.mean().unwrap_or(0.0),
                stop_metric: metric,
                denoiser_var_excess: None,
                onsager_gap: None,
            });
        }

        x_hat_prev.assign(&x_hat);
        x_v_prev = x_v;
        std::mem::swap(&mut l_prime_prev, &mut l_prime);
        x_hat_last_finite.assign(&x_hat);
        z_post_last_finite.assign(&z_post);

        if stop {
            converged = true;
            break;
        }
    }

    Ok(RunResult {
        x_hat,
        z_hat: z_post,
        iterations_run: iterations,
        trajectory,
        converged,
    })
}
