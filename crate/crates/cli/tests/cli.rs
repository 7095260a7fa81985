use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use subcurv_cli::registry::BUILTINS;
use subcurv_cli::report::reclassify_json;

const BIN: &str = env!("CARGO_BIN_EXE_subcurv");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SUBCURV_EPS_SING").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const CYLINDER: &str = "[structure]\nkind = cylinder\nn = 1\n[function phi]\nexpr = \"r2 - z\"\n[function neg]\nexpr = \"z - r2\"\n";
const HEIS: &str = "[structure]\nkind = heisenberg\nn = 1\n[function mz]\nexpr = \"-z\"\nbox = -1:1, -1:1, -1:1\n[function bowl]\nexpr = \"x^2 + y^2\"\nbox = -1:1, -1:1, -1:1\n";

#[test]
fn curvature_at_a_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.ini", CYLINDER);
    let a = run(&["curvature", "--config", &cfg, "--function", "phi", "--at", "0.5,0.3,0.34"]);
    let b = run(&["curvature", "--config", &cfg, "--function", "neg", "--at", "0.5,0.3,0.34"]);
    assert_eq!(a.status.code(), Some(0));
    let (ha, hb): (f64, f64) = (stdout(&a).trim().parse().unwrap(), stdout(&b).trim().parse().unwrap());
    let expected = 2.0 / 5f64.powf(0.25);
    assert!((ha - expected).abs() < 1e-8 * expected, "{ha}");
    assert!((ha + hb).abs() < 1e-12);
}

#[test]
fn sublaplacian_of_bowl_is_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.ini", HEIS);
    for at in ["0.3,-0.2,0.7", "-0.9,0.4,0.1"] {
        let o = run(&["curvature", "--config", &cfg, "--function", "bowl", "--p", "1", "--at", at]);
        let h: f64 = stdout(&o).trim().parse().unwrap();
        assert!((h - 4.0).abs() <= 1e-12, "{h}");
    }
}

#[test]
fn singular_point_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.ini", HEIS);
    let o = run(&["curvature", "--config", &cfg, "--function", "mz", "--at", "0,0,0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("singular point"));
}

#[test]
fn curvature_grid_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.ini", HEIS);
    let j = run(&["curvature", "--config", &cfg, "--function", "bowl", "--grid", "3"]);
    assert_eq!(j.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&j)).unwrap();
    assert_eq!(v["values"].as_array().unwrap().len(), 27);
    let c = run(&["curvature", "--config", &cfg, "--function", "bowl", "--grid", "3", "--format", "csv"]);
    assert_eq!(stdout(&c).lines().count(), 28);
}

#[test]
fn usage_and_config_errors_exit_two() {
    assert_eq!(run(&["scenario", "run", "no-such-scenario"]).status.code(), Some(2));
    assert_eq!(run(&["curvature", "--config", "/nonexistent.ini", "--function", "f", "--at", "0"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "b.ini", "[structure]\nkind = heisenberg\nn = 1\n[scenario]\nbogus = 1\n");
    assert_eq!(run(&["scenario", "run", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn rank_without_frames_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "e.ini",
        "[structure]\nkind = custom\ncoords = x1, x2\ncometric.1.1 = \"1\"\ncometric.2.2 = \"1\"\n",
    );
    assert_eq!(run(&["rank", "--config", &cfg, "--at", "0,0"]).status.code(), Some(4));
}

#[test]
fn rank_of_heisenberg_frames() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.ini", "[structure]\nkind = heisenberg\nn = 2\n[function s]\nexpr = \"x1 - 1/2\"\n");
    let o = run(&["rank", "--config", &cfg, "--at", "0.1,0.2,0.3,0.4,0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hormander: yes (rank 5 of 5)"));
    let o = run(&["rank", "--config", &cfg, "--surface", "s", "--at", "0.5,0.2,0.3,0.4,0.5"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rank 4 of 4"));
}

#[test]
fn list_names_every_builtin() {
    let out = stdout(&run(&["scenario", "list"]));
    for b in BUILTINS {
        assert!(out.lines().any(|l| l.starts_with(b.name) && l.contains(b.description)));
    }
}

#[test]
fn config_file_matches_builtin_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for b in BUILTINS {
        let cfg = write(dir.path(), &format!("{}.ini", b.name), b.config);
        let a = run(&["scenario", "run", b.name]);
        let c = run(&["scenario", "run", "--config", &cfg]);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, c.stdout, "{}", b.name);
    }
}

#[test]
fn reports_reclassify_to_the_same_label() {
    for b in BUILTINS {
        let v: Value = serde_json::from_str(&stdout(&run(&["scenario", "run", b.name]))).unwrap();
        assert_eq!(v["schema_version"], "1");
        assert_eq!(reclassify_json(&v).unwrap(), v["classification"], "{}", b.name);
    }
}

#[test]
fn out_file_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let o = run(&["scenario", "run", "h1-counterexample", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("x1,x2,v_minus_u,H_u,H_v,singular_u,singular_v\n"));
    assert_eq!(text.lines().count(), 65 * 65 + 1);
}

#[test]
fn eps_sing_override_is_recorded() {
    let o = Command::new(BIN).args(["scenario", "run", "hyperplane-z"]).env("SUBCURV_EPS_SING", "1e-3").output().unwrap();
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tolerances"]["eps_sing"].as_f64(), Some(1e-3));
}
