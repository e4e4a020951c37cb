//! Experiment configuration files: a TOML document with an `[experiment]`
//! section for the grid and an optional `[solver]` section for the iteration
//! controls. CLI flags override file values; `theta = inf` selects the plain
//! AWGN channel.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::{ExperimentConfig, ExperimentError};
use crate::solvers::{SolverConfig, SolverKind};

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    experiment: ExperimentSection,
    #[serde(default)]
    solver: SolverConfig,
}

#[derive(Serialize, Deserialize)]
struct ExperimentSection {
    m: usize,
    n: usize,
    lambda: f64,
    theta: f64,
    snr_db: Vec<f64>,
    solvers: Vec<SolverKind>,
    seeds: Vec<u64>,
    output_dir: String,
    #[serde(default)]
    allow_large_edgewise: bool,
}

impl From<&ExperimentConfig> for ConfigFile {
    fn from(c: &ExperimentConfig) -> Self {
        ConfigFile {
            experiment: ExperimentSection {
                m: c.m,
                n: c.n,
                lambda: c.lambda,
                theta: c.theta,
                snr_db: c.snr_db_list.clone(),
                solvers: c.solvers.clone(),
                seeds: c.seeds.clone(),
                output_dir: c.output_dir.display().to_string(),
                allow_large_edgewise: c.allow_large_edgewise,
            },
            solver: c.solver_config,
        }
    }
}

impl From<ConfigFile> for ExperimentConfig {
    fn from(f: ConfigFile) -> Self {
        ExperimentConfig {
            m: f.experiment.m,
            n: f.experiment.n,
            lambda: f.experiment.lambda,
            theta: f.experiment.theta,
            snr_db_list: f.experiment.snr_db,
            solvers: f.experiment.solvers,
            seeds: f.experiment.seeds,
            solver_config: f.solver,
            output_dir: PathBuf::from(f.experiment.output_dir),
            allow_large_edgewise: f.experiment.allow_large_edgewise,
        }
    }
}

/// Parses a config file. The result still needs `validate()`.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path)?;
    let file: ConfigFile = toml::from_str(&text)
        .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
    Ok(file.into())
}

/// Renders a config as the canonical TOML document.
pub fn config_to_toml(config: &ExperimentConfig) -> String {
    let file = ConfigFile::from(config);
    let body = toml::to_string_pretty(&file).expect("static schema always serializes");
    format!(
        "# glm-mp experiment configuration\n# theta = inf selects the plain awgn channel\n{body}"
    )
}

pub fn save_config(config: &ExperimentConfig, path: &Path) -> Result<(), ExperimentError> {
    Ok(std::fs::write(path, config_to_toml(config))?)
}

/// Named presets. `fig3` is the clipped compressed-sensing MSE comparison:
/// square system, half-dense Bernoulli-Gaussian signal, unit clipping
/// threshold, SNR sweep 10..30 dB, ten seeds, edgewise vs node-wise solvers.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "fig3" => Some(ExperimentConfig {
            m: 10_000,
            n: 10_000,
            lambda: 0.5,
            theta: 1.0,
            snr_db_list: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            solvers: vec![SolverKind::Epmpa, SolverKind::Gamp],
            seeds: (0..10).collect(),
            solver_config: SolverConfig {
                epsilon: 1e-6,
                max_iters: 50,
                ..SolverConfig::default()
            },
            output_dir: PathBuf::from("runs/fig3"),
            // The edgewise panel at 10^4 x 10^4 is 800 MB; opted in here,
            // scale m/n down (or drop epmpa) on small machines.
            allow_large_edgewise: true,
        }),
        _ => None,
    }
}
