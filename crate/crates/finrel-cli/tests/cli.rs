//! End-to-end tests of the `finrel` binary: command dispatch, exit codes,
//! validation messages, and byte-level determinism of emitted files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn finrel(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finrel"))
        .args(args)
        .arg("--out")
        .arg(out_dir)
        .env_remove("FINREL_OUT")
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).expect("scenario written");
    path.to_string_lossy().into_owned()
}

const EIGHT_STATE: &str = r#"{
  "states": ["w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8"],
  "payoff": [12, 10, 8, 6, 4, 3, 2, 1],
  "filtration": [
    [["w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8"]],
    [["w1", "w2", "w3"], ["w4", "w5", "w6", "w7", "w8"]],
    [["w1"], ["w2"], ["w3"], ["w4"], ["w5"], ["w6"], ["w7"], ["w8"]]
  ],
  "graph": {
    "edges": [
      ["w1", "w4", 1.0], ["w1", "w5", 1.0], ["w1", "w6", 1.0], ["w1", "w7", 1.0], ["w1", "w8", 1.0],
      ["w2", "w4", 1.0], ["w2", "w5", 1.0], ["w2", "w6", 1.0], ["w2", "w7", 1.0], ["w2", "w8", 1.0],
      ["w3", "w4", 1.0], ["w3", "w5", 1.0], ["w3", "w6", 1.0], ["w3", "w7", 1.0], ["w3", "w8", 1.0]
    ]
  },
  "source": {
    "rho": {"w1": 5, "w2": 5, "w3": 5, "w4": -3, "w5": -3, "w6": -3, "w7": -3, "w8": -3},
    "kappa": 0.4
  }
}"#;

const BINARY_SIM: &str = r#"{
  "model": {"sigma": 1.0, "T": 1.0, "dt": 0.001, "r_f": 0.0},
  "binary": {"L": 0.0, "H": 1.0, "pi0": 0.5},
  "paths": 3,
  "seed": 11,
  "mode": "innovation"
}"#;

#[test]
fn reproduce_section4_exits_zero_and_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let output = finrel(&["reproduce", "section4"], dir.path());
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("reproduce.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], serde_json::json!(true));
    assert!((report["phi_A"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((report["Q_A"].as_f64().unwrap() - 0.4722).abs() < 5e-4);
    assert!((report["S0"].as_f64().unwrap() - 6.412).abs() < 1e-3);
    assert_eq!(report["E_P_X"].as_f64().unwrap(), 5.75);
    assert!((report["H2_bits"].as_f64().unwrap() - 2.9716).abs() < 5e-3);
    assert!((report["E_Ht_bits"].as_f64().unwrap() - 1.9738).abs() < 5e-3);
    assert!((report["I_S1_bits"].as_f64().unwrap() - 0.9978).abs() < 5e-3);
    let levels = report["S1_levels"].as_array().unwrap();
    assert!((levels[0].as_f64().unwrap() - 10.0).abs() < 1e-12);
    assert!((levels[1].as_f64().unwrap() - 3.2).abs() < 1e-12);
}

#[test]
fn unknown_fixture_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = finrel(&["reproduce", "section9"], dir.path());
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn field_solve_emits_potential_and_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "eight.json", EIGHT_STATE);
    let output = finrel(&["field", "solve", &scenario], dir.path());
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("field.json")).unwrap()).unwrap();
    assert!((report["phi"][0].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert!((report["phi"][7].as_f64().unwrap() + 0.15).abs() < 1e-9);
    assert!(report["residual_inf"].as_f64().unwrap() < 1e-9);
}

#[test]
fn price_requires_payoff() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "no_payoff.json",
        r#"{"states": ["a", "b"], "filtration": [[["a", "b"]]]}"#,
    );
    let output = finrel(&["price", &scenario], dir.path());
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("payoff"), "stderr: {stderr}");
}

#[test]
fn all_missing_sections_are_listed_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "bare.json", r#"{"states": ["a", "b"]}"#);
    let output = finrel(&["price", &scenario], dir.path());
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("payoff") && stderr.contains("filtration"),
        "stderr: {stderr}"
    );
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "unknown.json",
        r#"{"states": ["a"], "source": {"rho": {"a": 0}, "kappa": 1.0, "kapa": 2.0}}"#,
    );
    let output = finrel(&["field", "solve", &scenario], dir.path());
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("source"), "stderr: {stderr}");
    assert!(stderr.contains("kapa"), "stderr: {stderr}");
}

#[test]
fn unresolved_labels_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "bad_label.json",
        r#"{"states": ["a", "b"], "source": {"rho": {"a": 1.0, "zz": -1.0}, "kappa": 1.0}}"#,
    );
    let output = finrel(&["field", "solve", &scenario], dir.path());
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("zz"));
}

#[test]
fn incompatible_source_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "unbalanced.json",
        r#"{"states": ["a", "b"], "source": {"rho": {"a": 1.0, "b": 1.0}, "kappa": 1.0}}"#,
    );
    let output = finrel(&["field", "solve", &scenario], dir.path());
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("incompatible source"));
}

#[test]
fn infeasible_constraints_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let infeasible = write_scenario(
        dir.path(),
        "infeasible.json",
        r#"{"states": ["a", "b"], "constraints": [{"coefficients": [0.0, 1.0], "target": 2.0}]}"#,
    );
    let output = finrel(&["maxent", &infeasible], dir.path());
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("infeasible"));

    // Contradictory targets on one function are also caught as infeasible.
    let contradictory = write_scenario(
        dir.path(),
        "contradictory.json",
        r#"{"states": ["a", "b", "c"], "constraints": [
            {"coefficients": [0.0, 1.0, 2.0], "target": 0.5},
            {"coefficients": [0.0, 1.0, 2.0], "target": 1.5}
        ]}"#,
    );
    let output = finrel(&["maxent", &contradictory], dir.path());
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("infeasible"));
}

#[test]
fn price_info_and_frames_run_on_the_eight_state_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "eight.json", EIGHT_STATE);

    let output = finrel(&["price", &scenario], dir.path());
    assert!(output.status.success());
    let csv = fs::read_to_string(dir.path().join("price.csv")).unwrap();
    assert!(csv.starts_with("time,state,block,price,return,drift\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 8);

    let output = finrel(&["info", &scenario], dir.path());
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("info.json")).unwrap()).unwrap();
    let t1 = &report["per_time"][1];
    assert!((t1["revealed_by_price"].as_f64().unwrap() - 0.9978).abs() < 5e-3);
    assert!((t1["h_total"].as_f64().unwrap() - 2.9716).abs() < 5e-3);

    let output = finrel(&["frames", &scenario], dir.path());
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("frames.json")).unwrap()).unwrap();
    // Geometry is curved and the default observer is flat.
    assert_eq!(report["frame"], serde_json::json!("static_in_field"));
    assert!(report["max_abs_drift"].as_f64().unwrap() > 1e-3);
}

#[test]
fn simulate_is_byte_deterministic_under_a_seed() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let scenario_a = write_scenario(dir_a.path(), "sim.json", BINARY_SIM);
    let scenario_b = write_scenario(dir_b.path(), "sim.json", BINARY_SIM);

    let output = finrel(&["simulate", &scenario_a], dir_a.path());
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let output = finrel(&["simulate", &scenario_b], dir_b.path());
    assert!(output.status.success());

    for name in [
        "path_00000.csv",
        "path_00001.csv",
        "path_00002.csv",
        "volatility_curve.csv",
    ] {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // A different seed produces different paths.
    let output = finrel(&["simulate", &scenario_a, "--seed", "99"], dir_a.path());
    assert!(output.status.success());
    let changed = fs::read(dir_a.path().join("path_00000.csv")).unwrap();
    let original = fs::read(dir_b.path().join("path_00000.csv")).unwrap();
    assert_ne!(changed, original);
}

#[test]
fn simulate_grid_observation_mode_works() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "grid.json",
        r#"{
            "model": {"sigma": 1.0, "T": 1.0, "dt": 0.01},
            "prior": {"grid": [0.0, 1.0, 2.0], "weights": [0.3, 0.4, 0.3]},
            "mode": "observation",
            "true_state": 2.0,
            "paths": 2,
            "seed": 5
        }"#,
    );
    let output = finrel(&["simulate", &scenario], dir.path());
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("simulate_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["paths"], serde_json::json!(2));
    let csv = fs::read_to_string(dir.path().join("path_00000.csv")).unwrap();
    assert!(csv.starts_with("t,xi,m,v,price,vol\n"));
    assert_eq!(csv.lines().count(), 1 + 101);
}

#[test]
fn simulate_requires_a_prior_or_binary_section() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "empty.json",
        r#"{"model": {"sigma": 1.0, "T": 1.0, "dt": 0.01}}"#,
    );
    let output = finrel(&["simulate", &scenario], dir.path());
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("prior") && stderr.contains("binary"));
}

#[test]
fn observation_mode_needs_a_true_state() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "no_state.json",
        r#"{
            "model": {"sigma": 1.0, "T": 1.0, "dt": 0.01},
            "binary": {"L": 0.0, "H": 1.0, "pi0": 0.5},
            "mode": "observation"
        }"#,
    );
    let output = finrel(&["simulate", &scenario], dir.path());
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("true_state"));
}

#[test]
fn maxent_on_mean_constraint_matches_target() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "maxent.json",
        r#"{
            "states": ["w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8"],
            "constraints": [
                {"coefficients": [12, 10, 8, 6, 4, 3, 2, 1], "target": 6.412}
            ]
        }"#,
    );
    let output = finrel(&["maxent", &scenario], dir.path());
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("maxent.json")).unwrap()).unwrap();
    let achieved = report["constraints"][0]["achieved"].as_f64().unwrap();
    assert!((achieved - 6.412).abs() < 1e-8);
}

#[test]
fn filtration_violations_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "bad_filtration.json",
        r#"{
            "states": ["a", "b", "c"],
            "payoff": [1, 2, 3],
            "filtration": [
                [["a", "b", "c"]],
                [["a", "b"], ["c"]],
                [["a"], ["b", "c"]]
            ]
        }"#,
    );
    let output = finrel(&["price", &scenario], dir.path());
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("straddles"));
}
