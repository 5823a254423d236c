use std::path::Path;
use std::process::{Command, Output};

fn nhl(command: &str, cfg_text: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = out.with_extension("cfg");
    std::fs::write(&cfg, cfg_text).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nhl"))
        .args([command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(extra)
        .output()
        .unwrap()
}

const SMALL: &str = "kernel.family = indicator
kernel.n = 1
kernel.delta = 0.5
grid.lower = -2
grid.upper = 2
grid.h = 0.05
grid.mode = regional
initial.kind = tanh
initial.rate = 3
evolve.t_end = 0.2
evolve.stride = 5
";

#[test]
fn identical_runs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(nhl("modulus-verify", SMALL, &a, &["--seed", "7"]).status.code(), Some(0));
    assert_eq!(nhl("modulus-verify", SMALL, &b, &["--seed", "7"]).status.code(), Some(0));
    let ra = std::fs::read(a.join("report.txt")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("report.txt")).unwrap());
    assert!(String::from_utf8(ra).unwrap().contains("run.seed: 7"));
    let files: Vec<_> = std::fs::read_dir(a.join("trajectory")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(files.len() >= 3);
    for f in files {
        assert_eq!(std::fs::read(a.join("trajectory").join(&f)).unwrap(), std::fs::read(b.join("trajectory").join(&f)).unwrap());
    }
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhl("evolve", &format!("{SMALL}kernel.colour = red\n"), &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kernel.colour"));
}

#[test]
fn bad_choice_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhl("evolve", &SMALL.replace("regional", "periodic"), &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("periodic"));
}

#[test]
fn missing_keys_are_listed_with_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = nhl("evolve", "kernel.family = gaussian\n", &out_dir, &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for key in ["kernel.n", "kernel.sigma", "grid.h", "evolve.t_end"] {
        assert!(stderr.contains(key), "{key} not listed: {stderr}");
    }
    let report = std::fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(report.contains("status: error"));
    assert!(report.contains("[config]\n") && report.contains("kernel.family: gaussian"));
}

#[test]
fn unknown_command_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhl("heat", SMALL, &dir.path().join("o"), &[]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("modulus-verify"));
}
