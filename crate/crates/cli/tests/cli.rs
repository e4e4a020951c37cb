//! End-to-end checks of the binary: exit codes, config generation, overrides
//! and byte-reproducible output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn glm_mp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glm-mp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("glm-mp-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn gen_config_prints_preset_to_stdout() {
    let dir = temp_dir("genconfig");
    let out = glm_mp(&["gen-config", "--preset", "fig3"], &dir);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[experiment]"));
    assert!(text.contains("lambda = 0.5"));
    assert!(text.contains("[solver]"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn gen_config_unknown_preset_is_a_validation_error() {
    let dir = temp_dir("genconfig-bad");
    let out = glm_mp(&["gen-config", "--preset", "fig9"], &dir);
    assert_eq!(out.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn run_executes_a_scaled_preset_deterministically() {
    let dir = temp_dir("run");
    let cfg_path = dir.join("fig3.cfg");
    let out = glm_mp(
        &[
            "gen-config",
            "--preset",
            "fig3",
            "--out",
            cfg_path.to_str().unwrap(),
        ],
        &dir,
    );
    assert!(out.status.success());

    // Scale the preset down hard via flag overrides.
    let run_args = [
        "run",
        "--config",
        cfg_path.to_str().unwrap(),
        "--m",
        "30",
        "--n",
        "30",
        "--snr",
        "10,20",
        "--seeds",
        "0,1",
        "--solver",
        "gamp,epmpa",
        "--max-iters",
        "5",
        "--out",
        "outdir",
    ];
    let out = glm_mp(&run_args, &dir);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read(dir.join("outdir/results.csv")).unwrap();
    let header = String::from_utf8_lossy(&csv);
    assert!(header.starts_with("solver,seed,snr_db,iter,mse,stop_metric,wall_ms,diverged"));
    assert!(dir.join("outdir/plot.gp").exists());

    let again = glm_mp(&run_args, &dir);
    assert!(again.status.success());
    let csv2 = std::fs::read(dir.join("outdir/results.csv")).unwrap();
    assert_eq!(csv, csv2, "repeated runs must be byte-identical");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn run_rejects_invalid_combinations_with_exit_2() {
    let dir = temp_dir("invalid");
    let cfg_path = dir.join("cfg.toml");
    glm_mp(
        &[
            "gen-config",
            "--preset",
            "fig3",
            "--out",
            cfg_path.to_str().unwrap(),
        ],
        &dir,
    );
    // amp on the clipped channel is rejected at validation time.
    let out = glm_mp(
        &[
            "run",
            "--config",
            cfg_path.to_str().unwrap(),
            "--m",
            "20",
            "--n",
            "20",
            "--solver",
            "amp",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));

    // Missing config file.
    let out = glm_mp(&["run", "--config", "nope.toml"], &dir);
    assert_eq!(out.status.code(), Some(2));

    // Unknown solver name is a clap-level error, also exit 2.
    let out = glm_mp(
        &[
            "run",
            "--config",
            cfg_path.to_str().unwrap(),
            "--solver",
            "vamp",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = temp_dir("threads");
    let cfg_path = dir.join("fig3.cfg");
    glm_mp(
        &["gen-config", "--preset", "fig3", "--out", cfg_path.to_str().unwrap()],
        &dir,
    );
    let args = [
        "run",
        "--config",
        cfg_path.to_str().unwrap(),
        "--m",
        "40",
        "--n",
        "40",
        "--snr",
        "10,20",
        "--seeds",
        "0,1,2",
        "--solver",
        "gamp",
        "--max-iters",
        "6",
        "--out",
        "out",
    ];
    let mut csvs = Vec::new();
    for threads in ["1", "4"] {
        let out = Command::new(env!("CARGO_BIN_EXE_glm-mp"))
            .args(args)
            .env("GLM_MP_THREADS", threads)
            .current_dir(&dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        csvs.push(std::fs::read(dir.join("out/results.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let _ = std::fs::remove_dir_all(&dir);
}
