//! End-to-end tests of the binary: exit codes, artifact formats, summary
//! metadata.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::{Command, Output};

fn write_zero_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("vortex.json");
    std::fs::write(
        &path,
        r#"{"perturbation": {"degree": 4, "epsilon": 1.0, "terms": [], "remainder": []}}"#,
    )
    .unwrap();
    path
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortex"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn missing_config_exits_one_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "--config",
            "nope.json",
            "simulate",
            "--r0",
            "3.0",
            "--theta0",
            "0.0",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn invalid_degree_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"perturbation": {"degree": 3, "epsilon": 1.0, "terms": []}}"#,
    )
    .unwrap();
    let out = run(
        &[
            "--config", "bad.json", "simulate", "--r0", "3.0", "--theta0", "0.0",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unperturbed_simulation_final_row() {
    let dir = tempfile::tempdir().unwrap();
    write_zero_config(dir.path());
    let out = run(
        &[
            "simulate",
            "--r0",
            &PI.to_string(),
            "--theta0",
            "0.0",
            "--dense",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = std::fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,r,theta,y11,y12,y21,y22,action");
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 1.0);
    assert!((last[1] - PI).abs() < 1e-9);
    assert!((last[2] - TAU).abs() < 1e-9);
    // Monodromy row-major: y21 = 2 for the integrable shear.
    assert!((last[5] - 2.0).abs() < 1e-9);
}

#[test]
fn entry_below_safe_edge_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write_zero_config(dir.path());
    let out = run(&["simulate", "--r0", "0.4", "--theta0", "0.0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("left the domain"));
}

#[test]
fn orbit_archive_schema() {
    let dir = tempfile::tempdir().unwrap();
    write_zero_config(dir.path());
    let out = run(&["orbit", "--s", "1", "--q", "1"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let archive: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/orbit_1_1.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(archive["s"], 1);
    assert_eq!(archive["q"], 1);
    let r = archive["r"].as_array().unwrap();
    assert_eq!(r.len(), 1);
    assert!((r[0].as_f64().unwrap() - PI).abs() < 1e-9);
    assert!(archive["el_residual"].as_f64().unwrap() < 1e-10);
    for key in ["x", "action", "map_residual"] {
        assert!(archive.get(key).is_some(), "missing key {key}");
    }
}

#[test]
fn summaries_embed_version_and_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    write_zero_config(dir.path());
    let out = run(&["window", "--theta-n", "8"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/window_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(
        summary["version"].as_str().unwrap(),
        env!("CARGO_PKG_VERSION")
    );
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert!(summary["alpha_threshold"].as_f64().unwrap().is_finite());
}

#[test]
fn inadmissible_orbit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write_zero_config(dir.path());
    let out = run(&["orbit", "--s", "1", "--q", "9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("admissible window"));
}

#[test]
fn summaries_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    write_zero_config(dir.path());
    assert_eq!(
        run(&["window", "--theta-n", "8"], dir.path()).status.code(),
        Some(0)
    );
    let first = std::fs::read(dir.path().join("out/window_summary.json")).unwrap();
    assert_eq!(
        run(&["--jobs", "2", "window", "--theta-n", "8"], dir.path())
            .status
            .code(),
        Some(0)
    );
    let second = std::fs::read(dir.path().join("out/window_summary.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn output_dir_env_override() {
    let dir = tempfile::tempdir().unwrap();
    write_zero_config(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_vortex"))
        .args(["report"])
        .env("VORTEX_OUTPUT_DIR", dir.path().join("elsewhere"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("elsewhere/twist_decay.gp").exists());
}
