//! Edgewise EP message passing over the dense factor graph.
//!
//! The schedule keeps one mean per edge (an M x N panel). Edge variances are
//! not stored as a panel: the merged update sets every edge variance on a
//! column to the same denoiser output, so a length-N vector carries them
//! exactly. The sum-node messages `x_s, v_s` are consumed immediately by the
//! variable-node aggregation and the next edge-mean update, so they are fused
//! into those passes in ratio form; this also avoids dividing by near-zero
//! matrix entries.

use ndarray::{Array1, Array2};

use super::{
    diverged, mse_opt, stop_check, stop_metric_value, ProblemInstance, RunResult, SolverConfig,
    SolverError, StopMetric, TrajectoryRecord,
};
use crate::channels::channel_moments;
use crate::messages::{ep_extrinsic, sanitize_variance, GaussianMessage};
use crate::priors::prior_moments;

pub fn epmpa_run(
    problem: &ProblemInstance,
    config: &SolverConfig,
) -> Result<RunResult, SolverError> {
    config.validate()?;
    let (m, n) = problem.a.dim();
    let (floor, cap) = (config.variance_floor, config.variance_cap);
    let a = &problem.a;
    let a_sq = &problem.a_sq;

    // Edge means start at the prior mean, edge variances at the prior variance.
    let prior_mean = problem.prior.marginal_mean();
    let prior_var = problem.prior.marginal_var().clamp(floor, cap);
    let mut x_v = Array2::<f64>::from_elem((m, n), prior_mean);
    let mut v_hat = Array1::<f64>::from_elem(n, prior_var);

    let mut z_s = Array1::<f64>::zeros(m);
    let mut v_s = Array1::<f64>::zeros(m);
    let mut z_post = Array1::<f64>::zeros(m);
    let mut edge_w = vec![0.0f64; m];
    let mut edge_dz = vec![0.0f64; m];

    let mut x_hat = Array1::<f64>::from_elem(n, prior_mean);
    let mut x_v_agg_prev = Array1::<f64>::zeros(n);
    let mut x_hat_prev = x_hat.clone();
    let mut x_hat_last_finite = x_hat.clone();
    let mut z_post_last_finite = z_post.clone();

    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;

    for t in 1..=config.max_iters {
        iterations = t;

        // Step I: sum-node pseudo-prior for each measurement.
        for i in 0..m {
            v_s[i] = a_sq.row(i).dot(&v_hat).max(floor);
            z_s[i] = a.row(i).dot(&x_v.row(i));
        }
        if !z_s.iter().all(|v| v.is_finite()) {
            return Err(diverged(
                t,
                "non-finite sum-node mean",
                &x_hat_last_finite,
                &z_post_last_finite,
                trajectory,
            ));
        }

        // Step II: EP at the measurement constraint node.
        for i in 0..m {
            let mom = channel_moments(&problem.channel, problem.y[i], z_s[i], v_s[i]).map_err(
                |source| SolverError::Channel {
                    iteration: t,
                    source,
                },
            )?;
            z_post[i] = mom.mean;
            let post = GaussianMessage::new(mom.mean, mom.variance.max(floor));
            let input = GaussianMessage::new(z_s[i], v_s[i]);
            let ext = ep_extrinsic(post, input).map_err(|_| SolverError::Channel {
                iteration: t,
                source: crate::channels::ChannelError::NonFiniteInput {
                    y: problem.y[i],
                    z_pseudo: z_s[i],
                },
            })?;
            let v_tilde = sanitize_variance(ext.variance, floor, cap);
            let z_tilde = if ext.mean.is_finite() { ext.mean } else { 0.0 };
            edge_w[i] = 1.0 / (v_tilde + v_s[i]);
            edge_dz[i] = z_tilde - z_s[i];
        }

        // Steps III and IV fused: aggregate the extrinsic sum-node messages at
        // each variable node. With v_s_{mn} = (v_tilde_m + v_s_m)/a_{mn}^2 and
        // x_s_{mn} = (z_tilde_m - z_s_m)/a_{mn} + x_v_{mn}, each edge
        // contributes a_{mn}^2 w_m to the precision and
        // (a_{mn} dz_m + a_{mn}^2 x_v_{mn}) w_m to the weighted mean.
        let mut denom = vec![0.0f64; n];
        let mut numer = vec![0.0f64; n];
        for i in 0..m {
            let w = edge_w[i];
            let dz = edge_dz[i];
            let a_row = a.row(i);
            let a_row = a_row.as_slice().expect("row-major");
            let asq_row = a_sq.row(i);
            let asq_row = asq_row.as_slice().expect("row-major");
            let xv_row = x_v.row(i);
            let xv_row = xv_row.as_slice().expect("row-major");
            for j in 0..n {
                denom[j] += asq_row[j] * w;
                numer[j] += (a_row[j] * dz + asq_row[j] * xv_row[j]) * w;
            }
        }
        let v_v_agg = Array1::from_iter(
            denom
                .iter()
                .map(|&d| sanitize_variance(1.0 / d, floor, cap)),
        );
        let x_v_agg = Array1::from_iter(numer.iter().zip(&v_v_agg).map(|(&s, &v)| v * s));
        if !x_v_agg.iter().all(|v| v.is_finite()) {
            return Err(diverged(
                t,
                "non-finite variable-node aggregate",
                &x_hat_last_finite,
                &z_post_last_finite,
                trajectory,
            ));
        }

        // Steps V and VI: denoise each component, then refresh the edge means
        // with the denoised estimate minus the per-edge extrinsic pull.
        let mut var_excess = f64::NEG_INFINITY;
        for j in 0..n {
            let d = prior_moments(&problem.prior, x_v_agg[j], v_v_agg[j]).map_err(|source| {
                SolverError::Prior {
                    iteration: t,
                    source,
                }
            })?;
            x_hat[j] = d.mean;
            var_excess = var_excess.max(d.variance - v_v_agg[j]);
            v_hat[j] = d.variance.clamp(floor, cap);
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

        let x_hat_s = x_hat.as_slice().expect("contiguous");
        let v_hat_s = v_hat.as_slice().expect("contiguous");
        for i in 0..m {
            let w = edge_w[i];
            let dz = edge_dz[i];
            let a_row = a.row(i);
            let a_row = a_row.as_slice().expect("row-major");
            let asq_row = a_sq.row(i);
            let asq_row = asq_row.as_slice().expect("row-major");
            let mut xv_row = x_v.row_mut(i);
            let xv_row = xv_row.as_slice_mut().expect("row-major");
            if config.damping < 1.0 {
                let d = config.damping;
                for j in 0..n {
                    let ratio = (a_row[j] * dz + asq_row[j] * xv_row[j]) * w;
                    xv_row[j] = d * (x_hat_s[j] - v_hat_s[j] * ratio) + (1.0 - d) * xv_row[j];
                }
            } else {
                for j in 0..n {
                    let ratio = (a_row[j] * dz + asq_row[j] * xv_row[j]) * w;
                    xv_row[j] = x_hat_s[j] - v_hat_s[j] * ratio;
                }
            }
        }

        let metric = match config.stop_metric {
            StopMetric::Estimate => {
                stop_metric_value(x_hat.as_slice().unwrap(), x_hat_prev.as_slice().unwrap())
            }
            _ => stop_metric_value(
                x_v_agg.as_slice().unwrap(),
                x_v_agg_prev.as_slice().unwrap(),
            ),
        };
        let stop = match config.stop_metric {
            StopMetric::Estimate => stop_check(
                x_hat.as_slice().unwrap(),
                x_hat_prev.as_slice().unwrap(),
                config.epsilon,
            ),
            _ => stop_check(
                x_v_agg.as_slice().unwrap(),
                x_v_agg_prev.as_slice().unwrap(),
                config.epsilon,
            ),
        };

        if config.record_trajectory {
            trajectory.push(TrajectoryRecord {
                iter: t,
                mse: mse_opt(&x_hat, problem.x_true.as_ref()),
                mean_v_x: v_hat.mean().unwrap_or(0.0),
                mean_v_s: v_s.mean().unwrap_or(0.0),
                stop_metric: metric,
                denoiser_var_excess: Some(var_excess),
                onsager_gap: None,
            });
        }

        x_v_agg_prev = x_v_agg;
        x_hat_prev.assign(&x_hat);
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
