//! Scalar-variance simplification of the node-wise solver: all per-component
//! variances are replaced by their averages, leaving a residual recursion in
//! which the channel and prior denoisers act through two matrix products.
//! Intended for well-mixed square-ish systems where variances concentrate.

use ndarray::Array1;

use super::{
    diverged, gemv_t, mse_opt, stop_check, stop_metric_value, ProblemInstance, RunResult,
    SolverConfig, SolverError, StopMetric, TrajectoryRecord,
};
use crate::channels::channel_moments;
use crate::priors::prior_moments;

pub fn gamp_simplified_run(
    problem: &ProblemInstance,
    config: &SolverConfig,
) -> Result<RunResult, SolverError> {
    config.validate()?;
    let (m, n) = problem.a.dim();
    let (floor, cap) = (config.variance_floor, config.variance_cap);
    let ratio = n as f64 / m as f64;

    let prior_mean = problem.prior.marginal_mean();
    let mut x_hat = Array1::<f64>::from_elem(n, prior_mean);
    let mut v_hat_x = problem.prior.marginal_var().clamp(floor, cap);
    let mut v_hat_x_prev = v_hat_x; // makes the residual ratio 1 at t = 1
    let mut s = Array1::<f64>::zeros(m);
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

        let v_s = (ratio * v_hat_x).max(floor);
        let mut z = problem.a.dot(&x_hat);
        let memory = v_hat_x / v_hat_x_prev;
        for i in 0..m {
            z[i] -= memory * s[i];
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(diverged(
                t,
                "non-finite residual state",
                &x_hat_last_finite,
                &z_post_last_finite,
                trajectory,
            ));
        }

        // Channel pass: posterior mean phi(z) and the averaged slope
        // <phi'> = <var{z|y, z; v_s} / v_s>.
        let mut phi_prime_sum = 0.0;
        for i in 0..m {
            let mom =
                channel_moments(&problem.channel, problem.y[i], z[i], v_s).map_err(|source| {
                    SolverError::Channel {
                        iteration: t,
                        source,
                    }
                })?;
            z_post[i] = mom.mean;
            phi_prime_sum += mom.variance / v_s;
            s[i] = mom.mean - z[i];
        }
        let phi_prime_avg = phi_prime_sum / m as f64;
        if phi_prime_avg >= 1.0 {
            return Err(diverged(
                t,
                "averaged channel slope reached 1; residual gain is non-positive",
                &x_hat_last_finite,
                &z_post_last_finite,
                trajectory,
            ));
        }
        let gain = 1.0 / (1.0 - phi_prime_avg);

        let corr = gemv_t(&problem.a, &s);
        let mut x_v = x_hat.clone();
        for j in 0..n {
            x_v[j] += gain * corr[j];
        }
        if !x_v.iter().all(|v| v.is_finite()) {
            return Err(diverged(
                t,
                "non-finite pseudo-observation",
                &x_hat_last_finite,
                &z_post_last_finite,
                trajectory,
            ));
        }
        let v_v = (v_hat_x * gain).clamp(floor, cap);

        let mut var_sum = 0.0;
        for j in 0..n {
            let d = prior_moments(&problem.prior, x_v[j], v_v).map_err(|source| {
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
            var_sum += d.variance;
        }
        if !x_hat.iter().all(|v| v.is_finite()) {
            return Err(diverged(
                t,
                "non-finite posterior estimate",
                &x_hat_last_finite,
                &z_post_last_finite,
                trajectory,
            ));
        }
        let v_hat_x_new = (var_sum / n as f64).clamp(floor, cap);

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
                mean_v_x: v_hat_x_new,
                mean_v_s: v_s,
                stop_metric: metric,
                denoiser_var_excess: None,
                onsager_gap: None,
            });
        }

        x_hat_prev.assign(&x_hat);
        x_v_prev = x_v;
        v_hat_x_prev = v_hat_x;
        v_hat_x = v_hat_x_new;
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
