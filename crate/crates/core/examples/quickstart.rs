//! Minimal end-to-end use: generate one clipped compressed-sensing instance,
//! run two solvers on it, and print their MSE trajectories side by side.

use glm_mp_core::experiments::generate_problem;
use glm_mp_core::{SolverConfig, SolverKind};

fn main() {
    let problem = generate_problem(1000, 1000, 0.5, 1.0, 20.0, 7).expect("valid parameters");
    let config = SolverConfig {
        max_iters: 25,
        ..SolverConfig::default()
    };

    let edgewise = SolverKind::Epmpa.run(&problem, &config).expect("run");
    let nodewise = SolverKind::Gamp.run(&problem, &config).expect("run");

    println!("iter   epmpa MSE    gamp MSE");
    let n = edgewise.trajectory.len().max(nodewise.trajectory.len());
    for t in 0..n {
        let at = |traj: &[glm_mp_core::TrajectoryRecord]| {
            traj.get(t)
                .or(traj.last())
                .and_then(|r| r.mse)
                .expect("mse recorded")
        };
        println!(
            "{:4}   {:.4e}   {:.4e}",
            t + 1,
            at(&edgewise.trajectory),
            at(&nodewise.trajectory)
        );
    }
}
