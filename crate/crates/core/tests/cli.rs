use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_singular-elliptic"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn solve_writes_solution_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("manufactured_lambda_one.toml");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let h1 = report["h1_seminorm"].as_f64().unwrap();
    assert!((h1 - 2.221441).abs() < 1e-3);
    assert_eq!(report["bounds"]["energy_ok"], true);
    let csv = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert!(csv.starts_with("x,value\n"));
    assert_eq!(csv.lines().count(), 514);
}

#[test]
fn solve_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config("solve_2d_layered.toml");
    for d in [&a, &b] {
        let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["report.json", "solution.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn solve_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let lam = write(
        dir.path(),
        "lam.toml",
        "[domain]\ndim = 1\ncells = 16\n[measure]\nkind = \"density\"\nexpression = \"1\"\n[problem]\nlambda = 1.5\n",
    );
    let out = run(&["solve", "--config", lam.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of scope regime"));
    let atom = write(
        dir.path(),
        "atom.toml",
        "[domain]\ndim = 2\ncells = 8\n[measure]\nkind = \"atom\"\nposition = 0.5\n[problem]\nlambda = 0.5\n",
    );
    let out = run(&["solve", "--config", atom.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let missing = dir.path().join("missing.toml");
    let out = run(&["solve", "--config", missing.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "stiff.toml",
        "[domain]\ndim = 1\ncells = 64\n[measure]\nkind = \"density\"\nexpression = \"1\"\n[problem]\nlambda = 0.5\n[solver]\nmax_newton = 1\n",
    );
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn energy_examples() {
    let out = run(&["energy", "--config", config("energy_dx.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["trace_norm"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["mass"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let text = String::from_utf8(out.stdout).unwrap();
    let keys: Vec<&str> = ["cov_energy", "h_minus1", "lambda", "mass", "trace_norm"].to_vec();
    let positions: Vec<usize> = keys.iter().map(|k| text.find(&format!("\"{k}\"")).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "keys are sorted");

    let dir = tempfile::tempdir().unwrap();
    let lin = write(
        dir.path(),
        "lin.toml",
        "[domain]\ndim = 1\ncells = 256\n[measure]\nkind = \"density\"\nexpression = \"1\"\n[problem]\nlambda = 0.0\n",
    );
    let v = json(&run(&["energy", "--config", lin.to_str().unwrap()]));
    assert!((v["trace_norm"].as_f64().unwrap() - 0.288675).abs() < 1e-4);

    let v = json(&run(&["energy", "--config", config("energy_atom.toml").to_str().unwrap()]));
    assert!((v["trace_norm"].as_f64().unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);

    let v = json(&run(&["energy", "--config", config("energy_boundary_power.toml").to_str().unwrap()]));
    assert_eq!(v["mass"], "infinite");
    assert!(v["trace_norm"].as_f64().unwrap().is_finite());
}

#[test]
fn distance_examples() {
    let a = config("distance_a.toml");
    let b = config("distance_b.toml");
    let v = json(&run(&["distance", "--config-a", a.to_str().unwrap(), "--config-b", b.to_str().unwrap()]));
    assert!((v["d_lambda"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let v = json(&run(&["distance", "--config-a", a.to_str().unwrap(), "--config-b", a.to_str().unwrap()]));
    assert_eq!(v["d_lambda"].as_f64().unwrap(), 0.0);

    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.toml", "[domain]\ndim = 1\ncells = 256\n[measure]\nkind = \"density\"\nexpression = \"1\"\n[problem]\nlambda = 0.0\n");
    let two = write(dir.path(), "two.toml", "[domain]\ndim = 1\ncells = 256\n[measure]\nkind = \"density\"\nexpression = \"2\"\n[problem]\nlambda = 0.0\n");
    let v = json(&run(&["distance", "--config-a", one.to_str().unwrap(), "--config-b", two.to_str().unwrap()]));
    assert!((v["d_lambda"].as_f64().unwrap() - 0.288675).abs() < 1e-4);

    let graded = write(dir.path(), "graded.toml", "[domain]\ndim = 1\ncells = 256\n[measure]\nkind = \"boundary_power\"\ns = 0.5\n[problem]\nlambda = 0.0\n");
    let out = run(&["distance", "--config-a", one.to_str().unwrap(), "--config-b", graded.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn homogenize_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("homogenize_laminate.toml");
    let out = run(&["homogenize", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "epsilon,l2_err,pair_1,pair_2,pair_3,pair_4,hminus1_rhs,d_lambda");
    let l2: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(l2.len(), 4);
    assert!(l2.windows(2).all(|w| w[1] < w[0]));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["rates"]["l2_err"].as_f64().unwrap() > 0.8);
}

#[test]
fn homogenize_rejects_unresolved_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("homogenize_laminate.toml")).unwrap().replace("cells = 1024", "cells = 512");
    let cfg = write(dir.path(), "coarse.toml", &text);
    let out = run(&["homogenize", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh must resolve ε"));
}

#[test]
fn verify_basic_passes() {
    let out = run(&["verify", "--suite", "basic", "--seed", "42"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 5);
    assert!(!text.contains("FAIL"));
    let again = run(&["verify", "--suite", "basic", "--seed", "42"]);
    assert_eq!(again.stdout, text.as_bytes());
    assert_eq!(run(&["verify", "--suite", "nonexistent"]).status.code(), Some(1));
}
