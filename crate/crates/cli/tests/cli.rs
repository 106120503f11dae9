use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spgs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spgs"))
        .args(args)
        .env_remove("SPGS_OUT_DIR")
        .output()
        .expect("spawn spgs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn solve_into(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["solve", "--q", "2.5", "--beta", "0.5", "--out", out];
    args.extend_from_slice(extra);
    spgs(&args)
}

#[test]
fn solve_q_2_5_beta_half_is_semitrivial() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("result.json"));
    assert_eq!(doc["schema"], "spgs-result/1");
    assert_eq!(doc["result"]["classification"], "Semitrivial");
    assert_eq!(doc["result"]["converged"], true);
    assert!(dir.path().join("result_profile.csv").exists());
    assert!(dir.path().join("result.config").exists());
}

#[test]
fn fresh_result_verifies() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into(dir.path(), &[]).status.code(), Some(0));
    let out = spgs(&["verify", dir.path().join("result.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn tampered_level_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into(dir.path(), &[]).status.code(), Some(0));
    let path = dir.path().join("result.json");
    let mut doc = read_json(&path);
    let level = doc["result"]["level"].as_f64().unwrap();
    doc["result"]["level"] = Value::from(level * 1.001);
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = spgs(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn tampered_profile_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into(dir.path(), &[]).status.code(), Some(0));
    let profile = dir.path().join("result_profile.csv");
    let text = std::fs::read_to_string(&profile).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cols: Vec<&str> = lines[10].split(',').collect();
    // either component may vanish identically, so perturb both
    let u: f64 = cols[1].parse().unwrap();
    let v: f64 = cols[2].parse().unwrap();
    lines[10] = format!("{},{:e},{:e},{}", cols[0], u * 1.05, v * 1.05, cols[3]);
    std::fs::write(&profile, lines.join("\n") + "\n").unwrap();
    let out = spgs(&["verify", dir.path().join("result.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn hbeta_at_q_2_beta_1_is_tie_plateau() {
    let dir = tempfile::tempdir().unwrap();
    let out = spgs(&["hbeta", "--q", "2", "--beta", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().nth(1).unwrap().contains("TiePlateau"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("hbeta.csv")).unwrap();
    assert!(csv.starts_with("q,beta,regime,y,h_max,threshold"));
}

#[test]
fn unknown_key_and_bad_values_exit_1() {
    assert_eq!(spgs(&["solve", "--set", "nonsense=1"]).status.code(), Some(1));
    assert_eq!(spgs(&["solve", "--q", "1.2"]).status.code(), Some(1));
    assert_eq!(spgs(&["hbeta", "--beta", "-1"]).status.code(), Some(1));
    assert_eq!(spgs(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn config_file_and_command_line_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.config");
    std::fs::write(&cfg, "# test\nq = 2.5\nbeta = 3.0\nn = 1024\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = spgs(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--beta",
        "0.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = read_json(&out_dir.join("result.json"));
    assert_eq!(doc["result"]["params"]["beta"], 0.5);
    assert_eq!(doc["result"]["grid"]["n"], 1024);
}

#[test]
fn random_init_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = solve_into(d.path(), &["--set", "init=random", "--set", "seed=7", "--set", "multi_start=1"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let pa = std::fs::read(a.path().join("result_profile.csv")).unwrap();
    let pb = std::fs::read(b.path().join("result_profile.csv")).unwrap();
    assert_eq!(pa, pb);
    let doc = read_json(&a.path().join("result.json"));
    assert_eq!(doc["result"]["init_tag"], "custom:random(seed=7)");
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_spgs"))
        .args(["hbeta", "--q", "1.8", "--beta", "0.5"])
        .env("SPGS_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("hbeta.csv").exists());
}
