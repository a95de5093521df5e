use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn umlm(args: &[&str], out: &Path, config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_umlm"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(text) = config {
        let path = out.with_extension("toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_line(o: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap()
}

#[test]
fn zero_torques_give_zero_forces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = "[eval]\ndrive_torque = 0.0\n[springs]\nk1 = 0.0\nk2 = 0.0\ntau_s1 = 0.0\ntau_s2 = 0.0\n";
    let o = umlm(&["eval-forces"], &out, Some(cfg));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out.join("eval_forces.json"));
    for key in ["closed_form_n", "oracle_n"] {
        for f in ["f1", "f2", "f3"] {
            assert_eq!(v[key][f].as_f64(), Some(0.0), "{key}.{f}");
        }
    }
    assert_eq!(v["relative_deviation"].as_f64(), Some(0.0));
}

#[test]
fn spring_override_reaches_the_force_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = umlm(&["eval-forces"], &out, Some("[springs]\nk1 = 12.1\nk2 = 525.6\ntau_s1 = 186.56\ntau_s2 = 199.43\n"));
    assert!(o.status.success());
    let v = json(&out.join("eval_forces.json"));
    let tau2 = v["torques_nmm"]["tau2"].as_f64().unwrap();
    assert!((tau2 + (12.1 * std::f64::consts::FRAC_PI_4 + 186.56)).abs() < 1e-9, "{tau2}");
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = umlm(&["eval-forces"], &dir.path().join("a"), Some("[arm]\nl4 = -1.0\n"));
    assert_eq!(o.status.code(), Some(2));
    let e = error_line(&o);
    assert_eq!(e["category"], "config");
    assert!(e["error"].as_str().unwrap().contains("l4"));

    let o = umlm(&["eval-forces"], &dir.path().join("b"), Some("[arm]\nl4_typo = 1.0\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(error_line(&o)["error"].as_str().unwrap().contains("l4_typo"));
}

#[test]
fn unreachable_target_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = umlm(&["coordinate", "--x", "-300", "--y", "5000"], &out, None);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_line(&o)["category"], "solver");
    // The manifest is still written.
    assert_eq!(json(&out.join("manifest.json"))["command"], "coordinate");
}

#[test]
fn coordinate_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = umlm(&["coordinate", "--x", "-650.5", "--y", "820"], &out, None);
    assert!(o.status.success());
    let v = json(&out.join("coordinate.json"));
    assert!((v["reached_mm"][0].as_f64().unwrap() + 650.5).abs() < 1e-9);
    assert!((v["reached_mm"][1].as_f64().unwrap() - 820.0).abs() < 1e-9);
}

#[test]
fn check_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = umlm(&["check", "--samples", "200", "--seed", "3"], &out, None);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("max deviation"));
    let v = json(&out.join("check.json"));
    assert_eq!(v["passed"], true);
    assert!(v["max_relative_deviation"].as_f64().unwrap() <= 1e-8);
}

fn column(header: &str, name: &str) -> usize {
    header.split(',').position(|c| c == name).unwrap()
}

#[test]
fn arm_csv_holds_the_locked_angle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(umlm(&["simulate-arm"], &out, None).status.success());
    let text = std::fs::read_to_string(out.join("arm_trajectory.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let width = header.split(',').count();
    let (phase, t0, t4) = (column(header, "phase"), column(header, "theta0_rad"), column(header, "theta4_rad"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == width));
    assert!(rows.iter().any(|r| r[phase] == "grasping"));
    for w in rows.windows(2) {
        if w[0][phase] == w[1][phase] {
            let held = if w[0][phase] == "lifting" { t4 } else { t0 };
            assert_eq!(w[0][held], w[1][held]);
        }
    }
}

fn optimize_bytes(dir: &Path, name: &str, threads: &str) -> (Vec<u8>, Vec<u8>, Value) {
    let out = dir.join(name);
    let args = ["optimize", "--particles", "60", "--iters", "40", "--runs", "2", "--seed", "11", "--threads", threads];
    let o = umlm(&args, &out, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (
        std::fs::read(out.join("optimize_history.csv")).unwrap(),
        std::fs::read(out.join("optimize.json")).unwrap(),
        json(&out.join("manifest.json")),
    )
}

#[test]
fn optimize_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let (h1, j1, m1) = optimize_bytes(dir.path(), "a", "1");
    let (h2, j2, m2) = optimize_bytes(dir.path(), "b", "1");
    let (h3, j3, _) = optimize_bytes(dir.path(), "c", "4");
    assert_eq!(h1, h2);
    assert_eq!(h1, h3);
    assert_eq!(j1, j2);
    assert_eq!(j1, j3);
    assert_eq!(m1["config_digest"], m2["config_digest"]);
    assert_eq!(m1["seed"], 11);
    let outputs: Vec<&str> = m1["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["optimize_history.csv", "optimize_runs.csv", "optimize.json", "manifest.json"]);
    // One header plus two runs of 41 history entries.
    assert_eq!(String::from_utf8(h1).unwrap().lines().count(), 1 + 2 * 41);
}

#[test]
fn surface_and_trends_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(umlm(&["force-surface"], &out, Some("[surface]\nrows = 4\ncols = 3\n")).status.success());
    let text = std::fs::read_to_string(out.join("force_surface.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("d2_mm,d3_mm,f1_n,f2_n,f3_n"));
    assert_eq!(text.lines().count(), 1 + 12);
    let t = json(&out.join("force_trends.json"));
    assert_eq!(t["trends"]["df2_dd2"]["positive"].as_u64(), Some(9));
}

#[test]
fn outputs_are_byte_identical_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["simulate-arm", "eval-forces", "force-surface", "coordinate"] {
        let (a, b) = (dir.path().join(format!("{cmd}-a")), dir.path().join(format!("{cmd}-b")));
        assert!(umlm(&[cmd], &a, None).status.success());
        assert!(umlm(&[cmd], &b, None).status.success());
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if name != "manifest.json" {
                assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{cmd} {name:?}");
            }
        }
    }
}
