use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smdp")).args(args).output().unwrap()
}

#[test]
fn faster_than_not_refuted_exits_zero() {
    let out = run(&["faster-than", "--fast", &corpus("fig2_U.smdp"), "--slow", &corpus("fig2_V.smdp"), "--depth", "13"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("NOT REFUTED"));
}

#[test]
fn failing_monotonicity_exits_one_with_witness() {
    let w = corpus("fig4_W_prod.smdp");
    let out = run(&[
        "--json",
        "monotonicity",
        "--fast",
        &corpus("fig2_U.smdp"),
        "--slow",
        &corpus("fig2_V.smdp"),
        "--ctx",
        &w,
        "--ctx2",
        &w,
        "--op",
        "product",
        "--mode",
        "strong",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["inputs"].as_array().unwrap().len(), 4);
    let v = &report["result"]["violations"][0];
    assert_eq!(v["condition"], "CdfSlow");
    assert_eq!(v["witness"]["kind"], "time");
}

#[test]
fn invalid_model_exits_two() {
    let out = run(&["validate", &corpus("bad_mass.smdp")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["validate", &corpus("fig3_V.smdp")]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["prob", "--word", "aa"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["prob", "--model", &corpus("fig2_U.smdp"), "--word", "zz", "--t", "1"]).status.code(), Some(2));
}
