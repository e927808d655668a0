//! End-to-end tests of the qpspec binary: exit-code contract, JSON shapes,
//! inline vs file inputs, and determinism of the scan output.

use std::process::{Command, Output};

fn qpspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn tree_recover_homogeneous_set() {
    let out = qpspec(&["tree", "recover", "--p", "3", "--gamma", "3",
                       "--set", "0,4,8,9,13,17,18,22,26"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["tree"]["I"], serde_json::json!([0, 2]));
    assert_eq!(v["tree"]["J"], serde_json::json!([1]));
}

#[test]
fn tree_recover_inhomogeneous_set_exits_one() {
    let out = qpspec(&["tree", "recover", "--p", "2", "--gamma", "2", "--set", "0,1,2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["homogeneous"], serde_json::json!(false));
}

#[test]
fn usage_error_exits_two() {
    let out = qpspec(&["tree", "recover", "--p", "3", "--gamma", "3", "--set", "0,banana"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn scale_guard_refusal_names_the_flag() {
    let out = qpspec(&["spectrum", "search", "--p", "5", "--gamma", "3", "--set", "0,1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--scale-guard"), "stderr: {err}");
}

#[test]
fn pair_hadamard_verdicts() {
    let ok = qpspec(&["pair", "hadamard", "--p", "2", "--gamma", "2",
                      "--c", "0,1", "--d", "0,2"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = qpspec(&["pair", "hadamard", "--p", "2", "--gamma", "2",
                       "--c", "0,1", "--d", "0,1"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn pipeline_on_constructed_pair() {
    let dir = std::env::temp_dir();
    let m = dir.join("qpspec_cli_m.json");
    let s = dir.join("qpspec_cli_s.json");
    let nu = qpspec(&["nu", "construct", "--p", "3", "--gamma", "3", "--branching", "0,2"]);
    assert_eq!(nu.status.code(), Some(0));
    std::fs::write(&m, &nu.stdout).unwrap();
    let sp = qpspec(&["nu", "spectrum", "--p", "3", "--gamma", "3", "--branching", "0,2"]);
    assert_eq!(sp.status.code(), Some(0));
    std::fs::write(&s, &sp.stdout).unwrap();

    let out = qpspec(&["recover", "pipeline",
                       "--measure", m.to_str().unwrap(),
                       "--spectrum", s.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["all_pass"], serde_json::json!(true));

    // same inputs inline
    let m_inline = String::from_utf8(nu.stdout).unwrap();
    let s_inline = String::from_utf8(sp.stdout).unwrap();
    let out2 = qpspec(&["recover", "pipeline", "--measure", &m_inline, "--spectrum", &s_inline]);
    assert_eq!(out2.status.code(), Some(0));
    assert_eq!(out.stdout, out2.stdout);
}

#[test]
fn functional_equation_full_grid() {
    let nu = qpspec(&["nu", "construct", "--p", "2", "--gamma", "3", "--branching", "0,1"]);
    let sp = qpspec(&["nu", "spectrum", "--p", "2", "--gamma", "3", "--branching", "0,1"]);
    let m = String::from_utf8(nu.stdout).unwrap();
    let s = String::from_utf8(sp.stdout).unwrap();
    let out = qpspec(&["pair", "functional-eq", "--measure", &m, "--spectrum", &s]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["functional_equation"], serde_json::json!(true));
    assert_eq!(v["grid_size"], serde_json::json!(16));
}

#[test]
fn fuglede_scan_deterministic() {
    let a = qpspec(&["fuglede", "scan", "--p", "2", "--gamma", "2", "--exhaustive"]);
    let b = qpspec(&["fuglede", "scan", "--p", "2", "--gamma", "2", "--exhaustive"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    assert_eq!(v["all_agree"], serde_json::json!(true));
    assert_eq!(v["total"], serde_json::json!(15));
    // random source is reproducible from the seed
    let r1 = qpspec(&["fuglede", "scan", "--p", "3", "--gamma", "2",
                      "--random", "50", "--seed", "7"]);
    let r2 = qpspec(&["fuglede", "scan", "--p", "3", "--gamma", "2",
                      "--random", "50", "--seed", "7"]);
    assert_eq!(r1.stdout, r2.stdout);
}

#[test]
fn dims_tsv_output() {
    let out = qpspec(&["dims", "entropy", "--branching", "0,2,4", "--ks", "2,4,6", "--tsv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k\tvalue");
    assert_eq!(lines[1], "2\t1/2");
    assert_eq!(lines[2], "4\t1/2");
    assert_eq!(lines[3], "6\t1/2");
}

#[test]
fn zeros_discrete_tags() {
    let sp = qpspec(&["nu", "spectrum", "--p", "2", "--gamma", "2", "--branching", "0,1"]);
    let s = String::from_utf8(sp.stdout).unwrap();
    let out = qpspec(&["zeros", "discrete", "--set", &s]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["tags"].is_object());
}

#[test]
fn tree_dot_emits_digraph() {
    let out = qpspec(&["tree", "dot", "--p", "2", "--gamma", "2", "--set", "0,1,2,3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("digraph"), "got: {text}");
}
