use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn novlab(args: &[&str], scenario: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_novlab"))
        .args(args)
        .arg("--scenario")
        .arg(fixture(scenario))
        .env_remove("NOVLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn body(o: &Output) -> Vec<String> {
    stdout(o).lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

#[test]
fn ring_examples() {
    let o = novlab(&["ring", "inv(1 - g) * (1 - g)"], "ring_loop.json");
    assert!(o.status.success());
    assert_eq!(body(&o), ["1_p"]);
    let o = novlab(&["ring", "(1+g)*(1-g)"], "ring_loop.json");
    assert_eq!(body(&o), ["1_p - g^2"]);
    let o = novlab(&["ring", "g*h"], "ring_two_objects.json");
    assert_eq!(body(&o), ["0"]);
}

#[test]
fn ring_truncation_follows_flag() {
    let o = novlab(&["ring", "inv(1 - g)", "--L", "3"], "ring_loop.json");
    assert_eq!(body(&o), ["1_p + g + g^2"]);
    assert!(stdout(&o).starts_with("# novlab 0.1.0 ring L=3 "));
}

#[test]
fn ring_errors_exit_2() {
    let o = novlab(&["ring", "g*(1 + k)"], "ring_loop.json");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("column 8"), "{err}");
    assert!(err.contains("undefined generator `k`"), "{err}");
    let o = novlab(&["ring", "inv(g)"], "ring_loop.json");
    assert_eq!(o.status.code(), Some(2));
    let o = novlab(&["ring", "(1 + g"], "ring_loop.json");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ring_csv_rows() {
    let o = novlab(&["ring", "(1+g)*(1-g)", "--out", "csv"], "ring_loop.json");
    assert_eq!(body(&o), ["arrow,u,coeff", "1_p,0.0,1", "g^2,-2.0,-1"]);
}

#[test]
fn apply_minus_positive() {
    let o = novlab(&["complex", "apply"], "slide_minus_positive.json");
    assert!(o.status.success());
    assert_eq!(body(&o), ["<p,q> = e + g.e"]);
}

#[test]
fn apply_json_round_trips() {
    let o = novlab(&["complex", "apply", "--out", "json"], "slide_minus_positive.json");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["header"]["L"], 3.0);
    assert_eq!(v["header"]["seed"], 0);
    assert_eq!(v["result"]["d_squared_preserved"], true);
    let terms = &v["result"]["complex"]["incidences"][0]["element"]["terms"];
    assert_eq!(terms[0]["arrow"], "e");
    assert_eq!(terms[1]["arrow"], "g.e");
}

#[test]
fn audit_of_doubling_passes() {
    let o = novlab(&["complex", "audit"], "doubling_audit.json");
    assert!(o.status.success());
    assert_eq!(body(&o), ["loop audit: pass", "residual: 1_p"]);
}

#[test]
fn broken_audit_exits_1() {
    let o = novlab(&["complex", "audit"], "broken_audit.json");
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(body(&o)[1], "residual: 1_p - g^2");
}

#[test]
fn cancellation_fixture_checks() {
    let o = novlab(&["complex", "check"], "cancellation.json");
    assert!(o.status.success(), "{}", stdout(&o));
    let o = novlab(&["complex", "check"], "no_cancellation.json");
    assert_eq!(o.status.code(), Some(1));
    assert!(body(&o)[0].contains("<p,r>"));
    let o = novlab(&["complex", "apply"], "cancellation.json");
    assert!(o.status.success());
}

#[test]
fn bad_documents_name_the_field() {
    let o = novlab(&["complex", "check"], "bad_complex.json");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("incidences[0].q"), "{err}");
    let o = novlab(&["complex", "audit"], "ring_loop.json");
    assert_eq!(o.status.code(), Some(2));
    let o = novlab(&["sim", "invariants"], "ring_loop.json");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invariants_on_zero_character() {
    let o = novlab(&["sim", "invariants"], "sim_zero_character.json");
    assert!(o.status.success());
    assert_eq!(body(&o)[0], "label: S_g^{0,-}");
    let o = novlab(&["sim", "invariants", "--out", "json"], "sim_zero_character.json");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["invariants"]["label"], "S_g^{0,-}");
    assert!(v["result"]["invariants"]["chi"].as_f64().unwrap().abs() < 1e-7);
}

#[test]
fn passages_follow_sign_of_s() {
    let o = novlab(&["sim", "passages"], "sim_passages.json");
    let b = body(&o);
    assert!(b.contains(&"s=-0.01 C_1: 31 points, orientation -1".to_string()), "{b:?}");
    assert!(b.contains(&"s=-0.01 C_2: 0 points, orientation none".to_string()));
    assert!(b.contains(&"s=0.01 C_4: 31 points, orientation +1".to_string()));
}

#[test]
fn incidence_case_b1_rows() {
    let o = novlab(&["sim", "incidence"], "sim_case_b1.json");
    assert!(o.status.success());
    assert_eq!(body(&o), ["s,count,crossings", "-0.01,gamma - g^2.gamma,2:-1", "0.01,gamma + g.gamma,1:+1"]);
}

#[test]
fn output_is_reproducible() {
    let a = novlab(&["sim", "incidence", "--seed", "7"], "sim_case_b1.json");
    let b = novlab(&["sim", "incidence", "--seed", "7"], "sim_case_b1.json");
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("# novlab 0.1.0 sim incidence L=4 tol=1e-9 seed=7\n"));
}

#[test]
fn doubling_sweep_on_positive_base() {
    let o = novlab(&["sim", "doubling", "--grid", "11"], "sim_doubling_plus.json");
    assert!(o.status.success());
    let b = body(&o);
    assert_eq!(b[0], "base: S_g^{0,+}");
    assert_eq!(b[1], "g^2 locus: positive half-line");
    assert_eq!(b[4], "cells meeting the g^3 locus: 0");
}

#[test]
fn doubling_threads_do_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_novlab"))
            .args(["sim", "doubling", "--grid", "7", "--out", "csv", "--scenario"])
            .arg(fixture("sim_doubling_plus.json"))
            .env("NOVLAB_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("3"));
}
