use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn loopdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopdyn")).args(args).output().expect("spawn loopdyn")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "loopdyn failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn body<'a>(bodies: &'a Value, name: &str) -> &'a Value {
    bodies.as_array().unwrap().iter().find(|b| b["name"] == name).unwrap()
}

fn vec3(v: &Value) -> [f64; 3] {
    let a = v.as_array().unwrap();
    [a[0].as_f64().unwrap(), a[1].as_f64().unwrap(), a[2].as_f64().unwrap()]
}

#[test]
fn freefall_reaches_gravity_speed_after_one_second() {
    let summary = stdout_json(&loopdyn(&["simulate", "freefall", "--duration", "1"]));
    let v = vec3(&body(&summary["final_bodies"], "ball")["linear_velocity"]);
    assert!((v[2] + 9.81).abs() < 1e-9, "v_z = {}", v[2]);
    assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
}

#[test]
fn fourbar_keeps_loop_closed_for_ten_seconds() {
    let summary = stdout_json(&loopdyn(&["simulate", "fourbar", "--duration", "10"]));
    let f = summary["max_constraint_violation"].as_f64().unwrap();
    assert!(f < 1e-4, "max constraint violation {f}");
}

#[test]
fn records_follow_stride_and_backends_agree() {
    let dir = tempfile::tempdir().unwrap();
    let dense = dir.path().join("dense.jsonl");
    let free = dir.path().join("free.jsonl");
    for (path, backend) in [(&dense, "dense"), (&free, "matrix-free")] {
        let out = loopdyn(&[
            "simulate",
            "fourbar",
            "--duration",
            "1",
            "--stride",
            "10",
            "--backend",
            backend,
            "-o",
            path.to_str().unwrap(),
        ]);
        stdout_json(&out);
    }
    let (a, b) = (records(&dense), records(&free));
    assert_eq!(a.len(), 24);
    assert_eq!(a.len(), b.len());
    assert_eq!(a[0]["step"], 10);
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(&b) {
        for (ba, bb) in ra["bodies"].as_array().unwrap().iter().zip(rb["bodies"].as_array().unwrap()) {
            let (pa, pb) = (vec3(&ba["position"]), vec3(&bb["position"]));
            for k in 0..3 {
                worst = worst.max((pa[k] - pb[k]).abs());
            }
        }
    }
    assert!(worst < 1e-6, "backend position gap {worst}");
}

#[test]
fn records_to_stdout_move_summary_to_stderr() {
    let out = loopdyn(&["simulate", "pendulum", "--duration", "0.05", "-o", "-"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v.get("step").is_some());
    }
    let summary: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(summary["scene"], "pendulum");
}

#[test]
fn bench_with_zero_steps_prints_nothing() {
    let out = loopdyn(&["bench", "fourbar", "--steps", "0"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn heterogeneous_bench_matches_solo_runs() {
    let out = loopdyn(&["bench", "fourbar", "sphere-on-plane", "--worlds", "32", "--steps", "20", "--verify"]);
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["worlds"], 32);
    let dev = rows[0]["max_solo_deviation"].as_f64().unwrap();
    assert!(dev <= 1e-12, "batch deviates from solo runs by {dev}");
}

#[test]
fn fk_at_rest_angle_is_exact() {
    let v = stdout_json(&loopdyn(&["fk", "fourbar", "-t", "crank=0"]));
    assert_eq!(v["converged"], true);
    assert!(v["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn fk_matches_closed_form_fourbar() {
    let (crank, coupler, rocker, ground) = (0.3f64, 0.2f64, 0.25f64, 0.4f64);
    let theta = 30f64.to_radians();
    let a = [crank * theta.cos(), crank * theta.sin()];
    let d = [ground - a[0], -a[1]];
    let dn = d[0].hypot(d[1]);
    let along = (coupler * coupler - rocker * rocker + dn * dn) / (2.0 * dn);
    let h = (coupler * coupler - along * along).sqrt();
    let e = [d[0] / dn, d[1] / dn];
    let b = [a[0] + e[0] * along - e[1] * h, a[1] + e[1] * along + e[0] * h];

    let v = stdout_json(&loopdyn(&["fk", "fourbar", "-t", "crank=30", "--degrees"]));
    let p = vec3(&body(&v["bodies"], "coupler")["position"]);
    let expect = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    assert!((p[0] - expect[0]).abs() < 1e-6 && (p[1] - expect[1]).abs() < 1e-6, "{p:?} vs {expect:?}");
    let crank_angle = v["joints"].as_array().unwrap().iter().find(|j| j[0] == "crank").unwrap()[1].as_f64().unwrap();
    assert!((crank_angle - theta).abs() < 1e-8);
}

#[test]
fn fk_out_of_reach_fails_but_reports_best_iterate() {
    let out = loopdyn(&["fk", "fourbar", "-t", "crank=120", "--degrees"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["converged"], false);
    assert!(v["residual"].as_f64().unwrap() > 1e-3);
}

#[test]
fn fk_rejects_unknown_joint() {
    let out = loopdyn(&["fk", "fourbar", "-t", "elbow=0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("elbow"));
}

#[test]
fn malformed_scene_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"name\": \"bad\",\n  \"bodies\": [ oops ]\n}\n").unwrap();
    let out = loopdyn(&["simulate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_scene_is_an_error() {
    let out = loopdyn(&["simulate", "no-such-scene"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nonpositive_time_step_is_rejected() {
    let out = loopdyn(&["simulate", "freefall", "--dt", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
