use std::path::PathBuf;
use std::process::Command;

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dtnlab-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn dtnlab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dtnlab")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn dtn_passes_with_defaults() {
    let dir = tmp("dtn");
    let (code, stdout) = dtnlab(&["dtn", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("[pass]"));
    assert!(!stdout.contains("[FAIL]"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn failing_gate_sets_exit_code() {
    let dir = tmp("gate");
    let cfg = dir.join("lab.toml");
    std::fs::write(&cfg, "[dtn]\ngamma_tolerance = 0.0\n").unwrap();
    let (code, stdout) = dtnlab(&["dtn", "--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("[FAIL]"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_config_is_an_error() {
    let dir = tmp("bad");
    let cfg = dir.join("lab.toml");
    std::fs::write(&cfg, "[scan]\nn_bumps = 0\n").unwrap();
    let (code, _) = dtnlab(&["scan", "--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code, 2);
    let (code, _) = dtnlab(&["fit", "--config", "/nonexistent/lab.toml"]);
    assert_eq!(code, 2);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_passes() {
    let dir = tmp("verify");
    let (code, stdout) = dtnlab(&["verify", "--threads", "1", "--seed", "3", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert!(dir.join("verify.json").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}
