use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn heatlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab")).args(args).output().expect("binary runs")
}

fn run_kernel(out: &Path, extra: &[&str]) -> Output {
    let cfg = config("flat_circle_kernel.toml");
    let mut args = vec!["kernel", "-c", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--grid", "128", "--dt", "2.5e-4"];
    args.extend_from_slice(extra);
    heatlab(&args)
}

#[test]
fn kernel_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_kernel(dir.path(), &["--tol", "kernel-oracle=1e-2"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.starts_with("# config-digest: "));
    assert!(stdout.contains("PASS     kernel-oracle"));
    for f in ["checks.txt", "checks.csv", "kernel.csv", "mass.csv"] {
        let body = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(body.starts_with("# config-digest: "), "{f}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_kernel(a.path(), &[]);
    run_kernel(b.path(), &[]);
    for f in ["checks.txt", "checks.csv", "kernel.csv", "mass.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_kernel(dir.path(), &["--tol", "kernel-oracle=1e-12", "-q"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("checks.txt")).unwrap();
    assert!(text.contains("FAIL     kernel-oracle"));
}

#[test]
fn malformed_tolerance_is_a_usage_error() {
    let cfg = config("flat_circle_kernel.toml");
    let out = heatlab(&["kernel", "-c", cfg.to_str().unwrap(), "--tol", "oops"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NAME=VALUE"));
}

#[test]
fn missing_config_exits_three() {
    let out = heatlab(&["verify-mass", "-c", "/nonexistent/heatlab.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/heatlab.toml"));
}

#[test]
fn bad_expression_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("expanding_circle_mass.toml")).unwrap().replace("1 + 0.1 * tau", "1 + 0.1 * tua");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let out = heatlab(&["verify-mass", "-c", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("metric.value"));
}

#[test]
fn show_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("conformal_sequence.toml");
    let out = heatlab(&["show-config", "-c", cfg.to_str().unwrap(), "--k-max", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let (header, body) = text.split_once('\n').unwrap();
    assert!(body.contains("k_max = 4"));
    let path = dir.path().join("canonical.toml");
    std::fs::write(&path, body).unwrap();
    let again = heatlab(&["show-config", "-c", path.to_str().unwrap()]);
    let again = String::from_utf8(again.stdout).unwrap();
    assert_eq!(again.lines().next().unwrap(), header);
}
