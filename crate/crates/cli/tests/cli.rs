//! End-to-end tests of the command-line interface: exit codes, output
//! schemas, determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rabinovich"))
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("rabinovich-cli-test-{}-{name}", std::process::id()));
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn classify_reports_case_paths() {
    let out = run(&["classify", "--h", "0", "--c", "2", "--beta", "1"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.starts_with("1.a.i"), "{text}");
    assert!(text.contains("(3,β)↔(3,β)"));

    let out = run(&["classify", "--h", "1", "--c", "3", "--beta", "0"]);
    assert!(stdout_of(&out).starts_with("2.a.i"));

    // boundary c = beta^2 with |h| < beta^2 is the listed segment 1.b.i
    let out = run(&["classify", "--h", "0", "--c", "1", "--beta", "1"]);
    assert!(stdout_of(&out).starts_with("1.b.i"));

    let out = run(&["classify", "--h", "0", "--c", "-2", "--beta", "1"]);
    assert_eq!(stdout_of(&out).trim(), "OUTSIDE_S_LIST");
}

#[test]
fn simulate_zero_span_single_row() {
    let out = run(&[
        "simulate", "--beta", "1", "--mode", "none", "--u0", "0.5,1.0,-0.3", "--t-end", "0",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x,y,z,H,C");
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split(',').count(), 6);
}

#[test]
fn simulate_full_mode_reports_convergence_verdict() {
    let cfg = tmp("fullerb.json");
    std::fs::write(
        &cfg,
        r#"{"beta": 1.0, "mode": "full", "h": 0.0, "c": 2.0, "auto_seed": true, "t_end": 40.0}"#,
    )
    .unwrap();
    let out_path = tmp("full.csv");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary = String::from_utf8_lossy(&out.stderr);
    assert!(summary.contains("CONVERGED_TO_ORBIT"), "{summary}");
    assert!(summary.contains("final_dist"), "{summary}");
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("t,x,y,z,H,C\n"));
    std::fs::remove_file(&cfg).ok();
    std::fs::remove_file(&out_path).ok();
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--beta", "1", "--mode", "casimir_leaf_stabilize", "--h", "0", "--c", "2",
        "--auto-seed", "--t-end", "5",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "identical configs must give identical bytes");
}

#[test]
fn simulate_json_format_roundtrips() {
    let out = run(&[
        "simulate", "--beta", "1", "--mode", "none", "--u0", "0.5,1.0,-0.3", "--t-end", "1",
        "--format", "json",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let samples = value["samples"].as_array().unwrap();
    assert!(samples.len() > 2);
    for key in ["t", "x", "y", "z", "H", "C"] {
        assert!(samples[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn malformed_config_is_exit_2_with_position() {
    let cfg = tmp("broken.json");
    std::fs::write(&cfg, "{ \"beta\": 1.0,\n  \"mode\": }").unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("column"), "{err}");
    std::fs::remove_file(&cfg).ok();
}

#[test]
fn unknown_keys_are_rejected() {
    let cfg = tmp("unknown.json");
    std::fs::write(
        &cfg,
        r#"{"beta": 1.0, "mode": "none", "u0": [1, 1, 1], "t_end": 1.0, "surprise": 4}"#,
    )
    .unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("surprise"));
    std::fs::remove_file(&cfg).ok();
}

#[test]
fn missing_level_is_exit_2() {
    let out = run(&[
        "simulate", "--beta", "1", "--mode", "full", "--u0", "1,1,1", "--t-end", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_fiber_is_exit_3() {
    // (h, c) = (-3, 2) at beta = 1: beta^2 + 2h + c < 0, no real fiber
    let out = run(&[
        "simulate", "--beta", "1", "--mode", "none", "--h", "-3", "--c", "2", "--auto-seed",
        "--t-end", "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn orbit_then_floquet_pipeline() {
    let orbit_path = tmp("orbit.json");
    let out = run(&[
        "orbit", "--beta", "1", "--h", "0", "--c", "2", "--out", orbit_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&orbit_path).unwrap()).unwrap();
    assert_eq!(value["beta"], 1.0);
    assert_eq!(value["samples"].as_array().unwrap().len(), 256);
    assert!(value["period"].as_f64().unwrap() > 1.0);

    // unperturbed multipliers all close to 1
    let out = run(&["floquet", "--orbit", orbit_path.to_str().unwrap()]);
    assert!(out.status.success());
    let fl: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let mults = fl["multipliers"].as_array().unwrap();
    assert_eq!(mults.len(), 3);
    for m in mults {
        let re = m[0].as_f64().unwrap();
        let im = m[1].as_f64().unwrap();
        let dist = ((re - 1.0).powi(2) + im * im).sqrt();
        assert!(dist <= 1e-3, "multiplier ({re}, {im})");
    }

    // full-mode stabilization contracts the nontrivial pair
    let out = run(&[
        "floquet", "--orbit", orbit_path.to_str().unwrap(), "--mode", "full", "--gain-a",
        "0.05", "--gain-b", "0.05",
    ]);
    assert!(out.status.success());
    let fl: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let mults = fl["multipliers"].as_array().unwrap();
    let mags: Vec<f64> = mults
        .iter()
        .map(|m| {
            let re = m[0].as_f64().unwrap();
            let im = m[1].as_f64().unwrap();
            (re * re + im * im).sqrt()
        })
        .collect();
    let near_one = mags.iter().filter(|&&m| (m - 1.0).abs() <= 1e-3).count();
    let inside = mags.iter().filter(|&&m| m < 1.0 - 1e-3).count();
    assert_eq!(near_one, 1, "magnitudes {mags:?}");
    assert_eq!(inside, 2, "magnitudes {mags:?}");

    std::fs::remove_file(&orbit_path).ok();
}

#[test]
fn equilibria_table_matches_verdicts() {
    let out = run(&["equilibria", "--beta", "1", "--m", "-2,0,2"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "family,m,x,y,z,stability");
    assert_eq!(lines.len(), 10); // 3 families x 3 values
    for line in &lines[1..] {
        assert!(line.ends_with("NONLINEARLY_STABLE") || line.ends_with("UNSTABLE"));
    }
    // E2 rows are all unstable at beta = 1
    for line in lines[1..].iter().filter(|l| l.starts_with("E2")) {
        assert!(line.ends_with("UNSTABLE"));
    }
}

#[test]
fn sweep_grid_has_no_disjointness_violations() {
    let out = run(&["sweep", "--beta", "1", "--n", "60"]);
    assert!(out.status.success());
    let summary = String::from_utf8_lossy(&out.stderr);
    assert!(summary.contains("disjointness_violations 0"), "{summary}");
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,c,case_path"));
    assert_eq!(text.lines().count(), 60 * 60 + 1);
    assert!(text.contains("1.a.i"));
    assert!(text.contains("OUTSIDE_S_LIST"));
}
