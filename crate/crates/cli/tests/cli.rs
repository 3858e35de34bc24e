use std::fs;
use std::path::Path;
use std::process::Command;

fn glv(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_glv"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const SINGLE: &str = r#"
kind = "simulate"
eps = 0.05
lambda0 = 1.0

[domain]
extent = [1.0, 1.0]

[time]
t_final = 0.05

[[vortices]]
position = [0.5, 0.5]
degree = 1

[profile]
r_max = 20.0
density = 1000
"#;

#[test]
fn ode_and_simulate_runs_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), SINGLE);
    for cmd in ["ode", "simulate"] {
        let out = dir.path().join(cmd);
        let (code, err) = glv(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
        assert_eq!(code, 0, "{err}");
        assert!(out.join("manifest.json").exists());
        assert!(out.join("config.toml").exists());
    }
    assert!(dir.path().join("ode/ode.csv").exists());
    assert!(dir.path().join("simulate/trajectory.csv").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = glv(&["ode", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code, 2);

    let cfg = write(dir.path(), &SINGLE.replace("eps = 0.05", "eps = 0.05\nepsilon = 0.1"));
    let (code, err) = glv(&["ode", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("epsilon"), "{err}");

    let cfg = write(dir.path(), &SINGLE.replace("eps = 0.05", "eps = -0.05"));
    let (code, err) = glv(&["ode", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("eps"), "{err}");
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), &SINGLE.replace("t_final = 0.05", "t_final = 0.05\ndt = 0.01"));
    let (code, err) = glv(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
}
