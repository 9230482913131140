//! End-to-end tests of the binary: exit codes, report schema, and the
//! documented fixtures.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_relucheck")
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

const ONE_SPLIT_NET: &str = r#"{
  "input_dim": 2,
  "layers": [
    {"dense": {"weights": [[2.0, -3.0], [1.0, 1.0]], "bias": [0.0, 0.0]}},
    "relu",
    {"dense": {"weights": [[-1.0, 1.0]], "bias": [4.0]}}
  ]
}"#;

const SAFE_PROP: &str = r#"{
  "region": {"box": {"lo": [0.0, 0.0], "hi": [0.5, 1.3333333333333333]}},
  "property": {"linear_safe": {"rows": [{"coeffs": [1.0], "relation": ">=", "rhs": 3.3}]}}
}"#;

const VIOLATED_PROP: &str = r#"{
  "region": {"box": {"lo": [0.0, 0.0], "hi": [0.5, 1.3333333333333333]}},
  "property": {"linear_safe": {"rows": [{"coeffs": [1.0], "relation": ">=", "rhs": 3.6}]}}
}"#;

/// f = a - b for two copies of x: the canonical dependency-loss network.
const CANCEL_NET: &str = r#"{
  "input_dim": 1,
  "layers": [
    {"dense": {"weights": [[1.0], [1.0]], "bias": [0.0, 0.0]}},
    "relu",
    {"dense": {"weights": [[1.0, -1.0]], "bias": [0.0]}}
  ]
}"#;

const UNIT_BOX_PROP_1D: &str = r#"{
  "region": {"box": {"lo": [0.0], "hi": [1.0]}},
  "property": {"linear_safe": {"rows": [{"coeffs": [1.0], "relation": ">=", "rhs": -10.0}]}}
}"#;

#[test]
fn verify_safe_fixture_exits_zero_with_depth_one() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", ONE_SPLIT_NET);
    let prop = write(&dir, "prop.json", SAFE_PROP);
    let out = run(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "safe");
    assert_eq!(report["stats"]["max_depth"], 1);
}

#[test]
fn verify_violated_fixture_exits_one_and_echoes_witness() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", ONE_SPLIT_NET);
    let prop = write(&dir, "prop.json", VIOLATED_PROP);
    let out = run(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "violated");
    let witness = report["witness"].as_array().unwrap();
    assert_eq!(witness.len(), 2);
    let outputs = report["outputs"].as_array().unwrap();
    assert!(outputs[0].as_f64().unwrap() < 3.6);
}

#[test]
fn missing_file_exits_at_least_64() {
    let out = run(&[
        "verify",
        "--network",
        "/nonexistent/net.json",
        "--property",
        "/nonexistent/prop.json",
    ]);
    assert!(out.status.code().unwrap() >= 64);
}

#[test]
fn usage_error_exits_64() {
    let out = run(&["verify", "--network", "only-half-the-args"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn malformed_property_exits_65_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", ONE_SPLIT_NET);
    let prop = write(
        &dir,
        "prop.json",
        r#"{"region":{"l3":{"center":[0,0],"eps":1}},"property":{"classification":{"true_label":0}}}"#,
    );
    let out = run(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(65));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("l3"), "stderr: {stderr}");
}

#[test]
fn bounds_reports_dependency_loss_gap() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", CANCEL_NET);
    let prop = write(&dir, "prop.json", UNIT_BOX_PROP_1D);
    let out = run(&[
        "bounds",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let nia = report["widths"]["nia"][0].as_f64().unwrap();
    let slr = report["widths"]["slr"][0].as_f64().unwrap();
    assert!((nia - 2.0).abs() < 1e-9, "nia width {nia}");
    assert!(slr.abs() < 1e-9, "slr width {slr}");
    // zero relaxed width: no finite improvement percentage
    assert!(report["improvement_pct"].is_null());
}

#[test]
fn bounds_single_mode_reports_only_that_mode() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", CANCEL_NET);
    let prop = write(&dir, "prop.json", UNIT_BOX_PROP_1D);
    let out = run(&[
        "bounds",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
        "--mode",
        "slr",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["widths"]["slr"].is_array());
    assert!(report["widths"].get("nia").is_none() || report["widths"]["nia"].is_null());
}

#[test]
fn oracle_prints_exact_range_and_enforces_limit() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", ONE_SPLIT_NET);
    let prop = write(&dir, "prop.json", SAFE_PROP);
    let out = run(&[
        "oracle",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let range = report["exact_range"][0].as_array().unwrap();
    assert!((range[0].as_f64().unwrap() - 3.5).abs() < 1e-6);

    let out = run(&[
        "oracle",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
        "--limit",
        "1",
    ]);
    assert!(out.status.code().unwrap() >= 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("limit"));
}

#[test]
fn verify_accepts_nnet_networks() {
    let dir = tempfile::tempdir().unwrap();
    let nnet_text = "\
2,2,1,2,
2,2,1,
0,
-10.0,-10.0,
10.0,10.0,
0.0,0.0,0.0,
1.0,1.0,1.0,
2.0,-3.0,
1.0,1.0,
0.0,
0.0,
-1.0,1.0,
4.0,
";
    let net = write(&dir, "net.nnet", nnet_text);
    let prop = write(&dir, "prop.json", SAFE_PROP);
    let out = run(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_with_normalize_maps_raw_bounds() {
    // Network normalization: mean 1, range 2 per input. The raw box
    // [1, 2] x [1, 2] maps to normalized [0, 0.5]^2.
    let dir = tempfile::tempdir().unwrap();
    let net_json = r#"{
      "input_dim": 2,
      "layers": [
        {"dense": {"weights": [[1.0, 1.0]], "bias": [0.0]}}
      ],
      "normalization": {
        "input_mins": [-10.0, -10.0],
        "input_maxes": [10.0, 10.0],
        "means": [1.0, 1.0],
        "ranges": [2.0, 2.0],
        "output_mean": 0.0,
        "output_range": 1.0
      }
    }"#;
    let prop_json = r#"{
      "region": {"box": {"lo": [1.0, 1.0], "hi": [2.0, 2.0]}},
      "property": {"linear_safe": {"rows": [{"coeffs": [1.0], "relation": "<=", "rhs": 1.05}]}}
    }"#;
    let net = write(&dir, "net.json", net_json);
    let prop = write(&dir, "prop.json", prop_json);
    // Normalized sum ranges over [0, 1]; <= 1.05 is safe.
    let out = run(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
        "--normalize",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    // Without normalization the raw sum reaches 4 and the property fails.
    let out = run(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn timeout_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", ONE_SPLIT_NET);
    let prop = write(&dir, "prop.json", SAFE_PROP);
    let out = run(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
        "--timeout",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "timeout");
}

#[test]
fn debug_env_var_emits_task_trace() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", ONE_SPLIT_NET);
    let prop = write(&dir, "prop.json", SAFE_PROP);
    let out = Command::new(bin())
        .env("NEURIFY_STYLE_LOG", "debug")
        .args([
            "verify",
            "--network",
            net.to_str().unwrap(),
            "--property",
            prop.to_str().unwrap(),
            "--threads",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("task depth"), "stderr: {stderr}");
}

/// A 12-ReLU network stays within the oracle limit and finishes promptly.
#[test]
fn oracle_handles_twelve_relu_network() {
    // Deterministic 2-12-1 chain with patterned weights straddling zero.
    let mut w1_rows = Vec::new();
    let mut b1 = Vec::new();
    for i in 0..12 {
        let a = ((i as f64) * 0.37).sin();
        let b = ((i as f64) * 0.53).cos();
        w1_rows.push(format!("[{a}, {b}]"));
        b1.push(format!("{}", ((i as f64) - 5.5) * 0.05));
    }
    let w2: Vec<String> = (0..12).map(|i| format!("{}", if i % 2 == 0 { 0.5 } else { -0.5 })).collect();
    let net_json = format!(
        r#"{{"input_dim": 2, "layers": [
            {{"dense": {{"weights": [{}], "bias": [{}]}}}},
            "relu",
            {{"dense": {{"weights": [[{}]], "bias": [0.0]}}}}
        ]}}"#,
        w1_rows.join(","),
        b1.join(","),
        w2.join(",")
    );
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", &net_json);
    let prop = write(
        &dir,
        "prop.json",
        r#"{"region":{"linf":{"center":[0.0,0.0],"eps":0.5}},
            "property":{"linear_safe":{"rows":[{"coeffs":[1.0],"relation":">=","rhs":-100.0}]}}}"#,
    );
    let start = std::time::Instant::now();
    let out = run(&[
        "oracle",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(start.elapsed().as_secs() < 60);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let range = report["exact_range"][0].as_array().unwrap();
    assert!(range[0].as_f64().unwrap() <= range[1].as_f64().unwrap());
}

#[test]
fn report_round_trips_through_schema() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(&dir, "net.json", ONE_SPLIT_NET);
    let prop = write(&dir, "prop.json", SAFE_PROP);
    let out = run(&[
        "verify",
        "--network",
        net.to_str().unwrap(),
        "--property",
        prop.to_str().unwrap(),
        "--seed",
        "7",
        "--threads",
        "2",
        "--timeout",
        "60",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string(&parsed).unwrap();
    let reparsed: serde_json::Value = serde_json::from_str(&again).unwrap();
    assert_eq!(parsed, reparsed);
    assert_eq!(parsed["config"]["seed"], 7);
    assert_eq!(parsed["config"]["threads"], 2);
}
