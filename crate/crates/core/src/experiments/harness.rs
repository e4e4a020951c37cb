//! Grid execution: one instance per (SNR, seed) pair shared by all selected
//! solvers, per-iteration rows collected into a CSV plus a gnuplot script.
//!
//! Cells may run in parallel (capped by `GLM_MP_THREADS`); rows are sorted
//! before writing so file content does not depend on scheduling. Wall times
//! are measured and kept in the in-memory records and the log, but written as
//! 0 in the CSV to keep output files byte-reproducible.

use rayon::prelude::*;
use std::fmt::Write as _;
use std::time::Instant;

use super::{generate_problem, ExperimentConfig, ExperimentError, ResultRecord};
use crate::solvers::{RunResult, SolverError, SolverKind};

pub const CSV_HEADER: &str = "solver,seed,snr_db,iter,mse,stop_metric,wall_ms,diverged";

/// Outcome of a grid run: all per-iteration records plus the cells that hit
/// the divergence guard (recorded, not fatal).
#[derive(Debug)]
pub struct ExperimentRun {
    pub records: Vec<ResultRecord>,
    /// (solver, snr_db, seed) of every diverged cell.
    pub diverged_cells: Vec<(SolverKind, f64, u64)>,
}

impl ExperimentRun {
    pub fn any_diverged(&self) -> bool {
        !self.diverged_cells.is_empty()
    }
}

/// Runs the full grid, writes `results.csv` and `plot.gp` into the output
/// directory, and returns the records. Fully deterministic for a given
/// config, independent of thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun, ExperimentError> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;

    // One instance per (snr, seed), shared across solvers so the algorithms
    // are compared on identical data.
    let mut groups = Vec::new();
    for &snr_db in &config.snr_db_list {
        for &seed in &config.seeds {
            groups.push((snr_db, seed));
        }
    }

    let pool = thread_pool()?;
    let group_outputs: Vec<Result<GroupOutput, ExperimentError>> = pool.install(|| {
        groups
            .par_iter()
            .map(|&(snr_db, seed)| run_group(config, snr_db, seed))
            .collect()
    });

    let mut records = Vec::new();
    let mut diverged_cells = Vec::new();
    for out in group_outputs {
        let out = out?;
        records.extend(out.records);
        diverged_cells.extend(out.diverged);
    }

    // Deterministic file order regardless of scheduling: solver, seed, snr, iter.
    records.sort_by(|a, b| {
        a.solver
            .name()
            .cmp(b.solver.name())
            .then(a.seed.cmp(&b.seed))
            .then(a.snr_db.partial_cmp(&b.snr_db).unwrap())
            .then(a.iter.cmp(&b.iter))
    });
    diverged_cells.sort_by(|a, b| {
        a.0.name()
            .cmp(b.0.name())
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.cmp(&b.2))
    });

    std::fs::write(config.output_dir.join("results.csv"), render_csv(&records))?;
    std::fs::write(
        config.output_dir.join("plot.gp"),
        render_plot_script(config),
    )?;

    Ok(ExperimentRun {
        records,
        diverged_cells,
    })
}

struct GroupOutput {
    records: Vec<ResultRecord>,
    diverged: Vec<(SolverKind, f64, u64)>,
}

fn run_group(
    config: &ExperimentConfig,
    snr_db: f64,
    seed: u64,
) -> Result<GroupOutput, ExperimentError> {
    let problem = generate_problem(
        config.m,
        config.n,
        config.lambda,
        config.theta,
        snr_db,
        seed,
    )?;
    let mut solver_config = config.solver_config;
    solver_config.record_trajectory = true;

    let mut records = Vec::new();
    let mut diverged = Vec::new();
    for &kind in &config.solvers {
        let started = Instant::now();
        let (result, cell_diverged): (RunResult, bool) = match kind.run(&problem, &solver_config) {
            Ok(res) => (res, false),
            Err(SolverError::Diverged { partial, .. }) => (*partial, true),
            Err(other) => return Err(other.into()),
        };
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        if cell_diverged {
            diverged.push((kind, snr_db, seed));
        }
        log::log_cell(kind, snr_db, seed, &result, wall_ms, cell_diverged);
        for rec in &result.trajectory {
            records.push(ResultRecord {
                solver: kind,
                seed,
                snr_db,
                iter: rec.iter,
                mse: rec.mse.unwrap_or(f64::NAN),
                stop_metric: rec.stop_metric,
                wall_ms,
                diverged: cell_diverged,
            });
        }
    }
    Ok(GroupOutput { records, diverged })
}

fn thread_pool() -> Result<rayon::ThreadPool, ExperimentError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("GLM_MP_THREADS") {
        let threads: usize = v.parse().map_err(|_| {
            ExperimentError::Validation(format!("GLM_MP_THREADS must be an integer, got '{v}'"))
        })?;
        builder = builder.num_threads(threads.max(1));
    }
    builder
        .build()
        .map_err(|e| ExperimentError::Validation(e.to_string()))
}

fn render_csv(records: &[ResultRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        // wall_ms is zeroed in the file: see module docs.
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},0,{}",
            r.solver.name(),
            r.seed,
            r.snr_db,
            r.iter,
            r.mse,
            r.stop_metric,
            u8::from(r.diverged),
        );
    }
    out
}

fn render_plot_script(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str("# MSE vs iteration, one curve per solver per SNR (seed-averaged).\n");
    out.push_str("# Usage: gnuplot -p plot.gp   (run from the directory holding results.csv)\n");
    out.push_str("set datafile separator ','\n");
    out.push_str("set logscale y\n");
    out.push_str("set xlabel 'iteration'\n");
    out.push_str("set ylabel 'MSE'\n");
    out.push_str("set key outside right top\n");
    out.push_str("plot \\\n");
    let mut entries = Vec::new();
    for kind in &config.solvers {
        for &snr in &config.snr_db_list {
            entries.push(format!(
                "  'results.csv' using 4:(strcol(1) eq '{name}' && $3 == {snr} ? $5 : 1/0) \
                 smooth unique with linespoints title '{name} {snr} dB'",
                name = kind.name(),
            ));
        }
    }
    out.push_str(&entries.join(", \\\n"));
    out.push('\n');
    out
}

mod log {
    use crate::solvers::{RunResult, SolverKind};

    /// One stderr line per finished cell; this is where real wall times live.
    pub(super) fn log_cell(
        kind: SolverKind,
        snr_db: f64,
        seed: u64,
        result: &RunResult,
        wall_ms: f64,
        diverged: bool,
    ) {
        let final_mse = result
            .trajectory
            .last()
            .and_then(|r| r.mse)
            .map(|m| format!("{m:.3e}"))
            .unwrap_or_else(|| "n/a".into());
        eprintln!(
            "[glm-mp] solver={} snr_db={} seed={} iters={} converged={} diverged={} final_mse={} wall_ms={:.1}",
            kind.name(),
            snr_db,
            seed,
            result.iterations_run,
            result.converged,
            diverged,
            final_mse,
            wall_ms
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::SolverConfig;
    use std::path::{Path, PathBuf};

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            m: 40,
            n: 40,
            lambda: 0.5,
            theta: 1.0,
            snr_db_list: vec![10.0, 20.0],
            solvers: vec![SolverKind::Gamp, SolverKind::Epmpa],
            seeds: vec![0, 1],
            solver_config: SolverConfig {
                max_iters: 6,
                ..SolverConfig::default()
            },
            output_dir: dir.to_path_buf(),
            allow_large_edgewise: false,
        }
    }

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("glm-mp-test-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn grid_produces_one_row_per_solver_iteration() {
        let dir = temp_dir("rows");
        let config = ExperimentConfig {
            solvers: vec![SolverKind::Gamp],
            snr_db_list: vec![10.0],
            seeds: vec![3],
            ..tiny_config(&dir)
        };
        let run = run_experiment(&config).unwrap();
        assert!(!run.any_diverged());
        // One cell; rows equal recorded iterations of that single run.
        let iters = run.records.iter().map(|r| r.iter).collect::<Vec<_>>();
        assert_eq!(iters, (1..=iters.len()).collect::<Vec<_>>());
        assert!(run.records.iter().all(|r| r.mse >= 0.0));
        assert!(run.records.iter().all(|r| !r.diverged));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn csv_is_byte_identical_across_runs_and_sorted() {
        let dir = temp_dir("det");
        let config = tiny_config(&dir);
        run_experiment(&config).unwrap();
        let first = std::fs::read(dir.join("results.csv")).unwrap();
        run_experiment(&config).unwrap();
        let second = std::fs::read(dir.join("results.csv")).unwrap();
        assert_eq!(first, second);

        let text = String::from_utf8(first).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        // wall_ms column is zeroed in the file.
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 8);
            assert_eq!(cols[6], "0");
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn plot_script_lists_every_curve() {
        let dir = temp_dir("plot");
        let config = tiny_config(&dir);
        run_experiment(&config).unwrap();
        let script = std::fs::read_to_string(dir.join("plot.gp")).unwrap();
        for name in ["gamp", "epmpa"] {
            for snr in ["10", "20"] {
                assert!(
                    script.contains(&format!("'{name} {snr} dB'")),
                    "missing curve {name}/{snr} in {script}"
                );
            }
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn records_carry_real_wall_times_even_though_csv_zeroes_them() {
        let dir = temp_dir("wall");
        let config = ExperimentConfig {
            solvers: vec![SolverKind::Gamp],
            snr_db_list: vec![10.0],
            seeds: vec![0],
            ..tiny_config(&dir)
        };
        let run = run_experiment(&config).unwrap();
        assert!(run.records.iter().all(|r| r.wall_ms > 0.0));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn higher_snr_does_not_hurt_final_mse() {
        let dir = temp_dir("snr");
        let config = ExperimentConfig {
            m: 150,
            n: 150,
            snr_db_list: vec![5.0, 25.0],
            solvers: vec![SolverKind::Gamp],
            seeds: vec![0, 1, 2],
            solver_config: SolverConfig {
                max_iters: 15,
                ..SolverConfig::default()
            },
            ..tiny_config(&dir)
        };
        let run = run_experiment(&config).unwrap();
        let median_final = |snr: f64| {
            let mut finals: Vec<f64> = config
                .seeds
                .iter()
                .map(|&s| {
                    run.records
                        .iter()
                        .rfind(|r| r.snr_db == snr && r.seed == s)
                        .unwrap()
                        .mse
                })
                .collect();
            finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            finals[finals.len() / 2]
        };
        assert!(median_final(25.0) < median_final(5.0));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
