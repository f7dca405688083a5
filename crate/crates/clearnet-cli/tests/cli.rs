//! End-to-end tests of the `clearnet` binary: golden-file comparisons on the
//! bundled fixtures, exit-code classification, and output plumbing.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    fs::read_to_string(path).expect("golden file exists")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clearnet"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

/// Pin the wall-clock field so outputs compare across runs.
fn normalize(text: &str) -> String {
    let key = "\"duration_seconds\":";
    match text.find(key) {
        Some(start) => {
            let vstart = start + key.len();
            let rest = &text[vstart..];
            let end = rest.find([',', '}']).expect("value terminated");
            format!("{}{key}0.0{}", &text[..start], &rest[end..])
        }
        None => text.to_string(),
    }
}

fn payload(out: &Output) -> serde_json::Value {
    let report: serde_json::Value =
        serde_json::from_str(&stdout_of(out)).expect("report is JSON");
    report["payload"].clone()
}

#[test]
fn golden_reports_are_stable() {
    let toy = fixture("toy.json");
    let toy2 = fixture("toy2.json");
    let ring3 = fixture("ring3.json");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["margin", &toy, "--norm", "linf"], "margin_toy_linf.json"),
        (vec!["clear", &toy, "--delta", "-1.5"], "clear_toy_shift.json"),
        (vec!["validate", &ring3, "--allow-boundary"], "validate_ring3_boundary.json"),
        (
            vec!["worst-case", &toy2, "--norm", "l1", "--epsilon", "1", "--check-uniqueness"],
            "worst_case_toy2_l1.json",
        ),
    ];
    for (args, golden_name) in cases {
        let out = run(&args);
        assert!(out.status.success(), "{args:?} failed: {}", stdout_of(&out));
        assert_eq!(normalize(&stdout_of(&out)), golden(golden_name), "golden {golden_name}");
    }
}

#[test]
fn golden_sweep_csv_is_stable() {
    let out = run(&[
        "sweep",
        &fixture("toy.json"),
        "--norm",
        "linf",
        "--grid",
        "4",
        "--runs",
        "2",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout_of(&out), golden("sweep_toy_linf.csv"));
}

#[test]
fn exit_codes_classify_failures() {
    // Structural problem: nonzero diagonal.
    let out = run(&["validate", &fixture("bad_diagonal.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(err["error"]["kind"], "validation");

    // Missing file.
    let out = run(&["validate", "/nonexistent/net.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(err["error"]["detail"], "unreadable-input");
    assert_eq!(err["input_digest"], serde_json::Value::Null);

    // Wrong shock length.
    let out = run(&["clear", &fixture("toy.json"), "--delta", "-0.1,-0.2"]);
    assert_eq!(out.status.code(), Some(2));

    // Nominal default: domain condition, not a structural one.
    let out = run(&["validate", &fixture("insolvent.json"), "--allow-boundary"]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(err["error"]["kind"], "domain");

    // Radius beyond the insolvency margin.
    let out = run(&[
        "worst-case",
        &fixture("toy.json"),
        "--norm",
        "linf",
        "--epsilon",
        "2.5",
    ]);
    assert_eq!(out.status.code(), Some(3));

    // Boundary network accepted only with the flag.
    assert_eq!(run(&["validate", &fixture("ring3.json")]).status.code(), Some(3));
    assert_eq!(
        run(&["validate", &fixture("ring3.json"), "--allow-boundary"]).status.code(),
        Some(0)
    );
}

#[test]
fn validate_then_zero_shock_clear_reports_no_losses() {
    let out = run(&["validate", &fixture("toy.json")]);
    assert!(out.status.success());
    let v = payload(&out);
    assert_eq!(v["strictly_solvent"], true);

    let out = run(&["clear", &fixture("toy.json"), "--delta", "0"]);
    assert!(out.status.success());
    let v = payload(&out);
    assert_eq!(v["loss"], 0.0);
    assert_eq!(v["defaulted"], serde_json::json!([false, false]));
    assert_eq!(v["payments"], serde_json::json!([1.0, 0.0]));
}

#[test]
fn clearing_methods_agree_through_the_cli() {
    let mut payments: Vec<serde_json::Value> = Vec::new();
    for method in ["lp", "iter-max"] {
        let out = run(&[
            "clear",
            &fixture("mesh5.json"),
            "--delta",
            "-0.5,-0.25,-0.1",
            "--method",
            method,
        ]);
        assert!(out.status.success(), "{method}: {}", stdout_of(&out));
        payments.push(payload(&out)["payments"].clone());
    }
    let lp: Vec<f64> =
        payments[0].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let iter: Vec<f64> =
        payments[1].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (a, b) in lp.iter().zip(&iter) {
        assert!((a - b).abs() <= 1e-6, "lp {a} vs iterative {b}");
    }
}

#[test]
fn sweep_out_file_carries_the_same_csv_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let out = run(&[
        "sweep",
        &fixture("toy2.json"),
        "--norm",
        "l1",
        "--grid",
        "3",
        "--runs",
        "4",
        "--seed",
        "11",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let written = fs::read_to_string(&path).unwrap();
    assert_eq!(stdout_of(&out), written);
    assert!(written.starts_with("epsilon,eta_wc,i_star,rand_min,rand_mean,rand_max\n"));
}

#[test]
fn infinite_margin_serializes_as_string() {
    // A solvent network with no asset exposure has an infinite margin.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("unexposed.json");
    fs::write(
        &path,
        r#"{
            "nodes": ["a", "b"],
            "liabilities": [[0.0, 1.0], [0.0, 0.0]],
            "external_inflows": [2.0, 0.0],
            "external_outflows": [0.0, 0.0],
            "asset_shares": [[0.0], [0.0]],
            "nominal_prices": [1.0]
        }"#,
    )
    .unwrap();
    let out = run(&["margin", path.to_str().unwrap(), "--norm", "l1"]);
    assert!(out.status.success());
    let v = payload(&out);
    assert_eq!(v["epsilon_star"], "inf");
    assert_eq!(v["epsilon_star_relative"], "inf");
    assert_eq!(v["witness"], serde_json::Value::Null);

    let out = run(&["insolvency-margin", path.to_str().unwrap(), "--norm", "l1"]);
    assert!(out.status.success());
    assert_eq!(payload(&out)["epsilon_ub"], "inf");
}

#[test]
fn digest_is_stable_and_thread_cap_is_accepted() {
    let first = run(&["margin", &fixture("toy.json"), "--norm", "l1"]);
    let second = Command::new(env!("CARGO_BIN_EXE_clearnet"))
        .args(["margin", &fixture("toy.json"), "--norm", "l1"])
        .env("CLEARNET_THREADS", "1")
        .output()
        .unwrap();
    assert!(first.status.success() && second.status.success());
    let a: serde_json::Value = serde_json::from_str(&stdout_of(&first)).unwrap();
    let b: serde_json::Value = serde_json::from_str(&stdout_of(&second)).unwrap();
    assert_eq!(a["input_digest"], b["input_digest"]);
    assert_eq!(a["payload"], b["payload"]);
}
