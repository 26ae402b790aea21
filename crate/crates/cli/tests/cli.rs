//! End-to-end tests of the command-line binary: exit codes, determinism,
//! report shapes, and the schema round trip.

use std::path::PathBuf;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_confmdp"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary must launch")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn temp_path(name: &str) -> PathBuf {
    let dir = tempfile::tempdir().expect("tempdir");
    // keep the directory alive by leaking it: the test process is short
    let path = dir.path().join(name);
    std::mem::forget(dir);
    path
}

const GEN_ARGS: &[&str] = &[
    "gen", "--states", "4", "--actions", "2", "--gamma", "0.9", "--smoothing", "0.5", "--seed",
    "7",
];

#[test]
fn gen_produces_a_valid_instance_file() {
    let output = run(GEN_ARGS);
    assert!(output.status.success(), "{}", stderr(&output));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(parsed["version"], 1);
    assert_eq!(parsed["states"]["n"], 4);
    assert!(parsed["policy_new"].is_array());
    assert!(parsed["configuration_new"].is_array());
}

#[test]
fn gen_is_byte_deterministic() {
    let first = run(GEN_ARGS);
    let second = run(GEN_ARGS);
    assert!(first.status.success());
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn gen_rejects_gamma_one_with_exit_two() {
    let output = run(&["gen", "--states", "3", "--actions", "2", "--gamma", "1.0"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("gamma"), "{}", stderr(&output));
}

#[test]
fn unknown_flags_exit_two() {
    let output = run(&["gen", "--bogus"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn bounds_pass_on_a_generated_instance() {
    let path = temp_path("instance.json");
    let gen = binary()
        .args(GEN_ARGS)
        .args(["--out", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(gen.status.success(), "{}", stderr(&gen));

    for mode in ["exact", "theoretical"] {
        let output = run(&["bounds", "--in", path.to_str().unwrap(), "--mode", mode]);
        assert!(
            output.status.success(),
            "mode {mode}: {}",
            stderr(&output)
        );
        let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
        assert_eq!(report["mode"], mode);
        assert!(report["instance_digest"].as_str().unwrap().len() == 64);
        let bounds = report["bounds"].as_array().unwrap();
        assert_eq!(bounds.len(), 4);
        for row in bounds {
            assert_eq!(row["pass"], true, "row {row}");
        }
        assert_eq!(report["identity"]["pass"], true);
        for lemma in report["lemmas"].as_array().unwrap() {
            assert_eq!(lemma["pass"], true, "lemma {lemma}");
        }
    }
}

#[test]
fn bounds_writes_the_csv_table() {
    let instance = temp_path("instance.json");
    let csv = temp_path("table.csv");
    binary()
        .args(GEN_ARGS)
        .args(["--out", instance.to_str().unwrap()])
        .output()
        .unwrap();
    let output = run(&[
        "bounds",
        "--in",
        instance.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let table = std::fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "name,kind,bound_value,exact_value,slack,applicable,pass"
    );
    // four bounds + identity + three lemmas
    assert_eq!(lines.count(), 8);
    assert!(!table.contains(';'), "comma-delimited with '.' decimals");
}

#[test]
fn bounds_without_candidate_pair_exits_two() {
    let path = temp_path("bare.json");
    let gen = binary().args(GEN_ARGS).output().unwrap();
    let mut parsed: serde_json::Value = serde_json::from_str(&stdout(&gen)).unwrap();
    parsed.as_object_mut().unwrap().remove("policy_new");
    parsed.as_object_mut().unwrap().remove("configuration_new");
    std::fs::write(&path, serde_json::to_string_pretty(&parsed).unwrap()).unwrap();

    let output = run(&["bounds", "--in", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("candidate"), "{}", stderr(&output));
}

#[test]
fn bounds_rejects_unknown_version_with_exit_two() {
    let path = temp_path("versioned.json");
    let gen = binary().args(GEN_ARGS).output().unwrap();
    let mut parsed: serde_json::Value = serde_json::from_str(&stdout(&gen)).unwrap();
    parsed["version"] = serde_json::json!(3);
    std::fs::write(&path, serde_json::to_string(&parsed).unwrap()).unwrap();
    let output = run(&["bounds", "--in", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("version"));
}

#[test]
fn verify_runs_the_property_suite() {
    let output = run(&["verify", "--trials", "2", "--seed", "11", "--sizes", "3x2"]);
    assert!(output.status.success(), "{}", stderr(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["trials"], 2);
    let properties = report["properties"].as_array().unwrap();
    assert!(properties.len() > 20);
    for property in properties {
        assert_eq!(property["pass"], true, "property {property}");
        assert_eq!(property["samples"], 2);
    }
    // the human table goes to stderr
    assert!(stderr(&output).contains("min slack"));
}

#[test]
fn verify_rejects_zero_trials_with_exit_two() {
    let output = run(&["verify", "--trials", "0"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn verify_rejects_malformed_sizes_with_exit_two() {
    let output = run(&["verify", "--trials", "1", "--sizes", "3-2"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn improve_reports_a_monotone_deterministic_trace() {
    let path = temp_path("instance.json");
    binary()
        .args([
            "gen", "--states", "3", "--actions", "2", "--gamma", "0.05", "--smoothing", "0.6",
            "--seed", "2",
        ])
        .args(["--out", path.to_str().unwrap()])
        .output()
        .unwrap();

    let args = [
        "improve",
        "--in",
        path.to_str().unwrap(),
        "--iters",
        "5",
        "--grid",
        "8",
    ];
    let output = run(&args);
    assert!(output.status.success(), "{}", stderr(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert!(
        !report["steps"].as_array().unwrap().is_empty(),
        "this instance certifies steps"
    );
    let initial = report["initial_j"].as_f64().unwrap();
    let final_j = report["final_j"].as_f64().unwrap();
    assert!(final_j >= initial);
    let mut last = initial;
    for step in report["steps"].as_array().unwrap() {
        let before = step["j_before"].as_f64().unwrap();
        let after = step["j_after"].as_f64().unwrap();
        let predicted = step["predicted_bound"].as_f64().unwrap();
        let realized = step["realized_improvement"].as_f64().unwrap();
        assert_eq!(before, last);
        assert!(after >= before);
        assert!(realized >= predicted - 1e-9);
        last = after;
    }
    assert!(stderr(&output).contains("final J"));

    let again = run(&args);
    let strip_timing = |text: &str| {
        let mut value: serde_json::Value = serde_json::from_str(text).unwrap();
        value.as_object_mut().unwrap().remove("elapsed_ms");
        value
    };
    assert_eq!(
        strip_timing(&stdout(&output)),
        strip_timing(&stdout(&again)),
        "traces must be identical"
    );
}

#[test]
fn improve_rejects_tiny_grids_with_exit_two() {
    let path = temp_path("instance.json");
    binary()
        .args(GEN_ARGS)
        .args(["--out", path.to_str().unwrap()])
        .output()
        .unwrap();
    let output = run(&["improve", "--in", path.to_str().unwrap(), "--grid", "1"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn bounds_mark_non_contractive_candidates_inapplicable() {
    // candidate pair: opposed deterministic policy and swap dynamics on
    // discrete metrics, so gamma * L_p' * (1 + L_pi') = 1.8 >= 1
    let discrete2 = serde_json::json!({ "n": 2, "dist": [[0.0, 1.0], [1.0, 0.0]] });
    let uniform_config = serde_json::json!([
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.5, 0.5], [0.5, 0.5]]
    ]);
    let instance = serde_json::json!({
        "version": 1,
        "states": discrete2,
        "actions": discrete2,
        "gamma": 0.9,
        "reward": [
            [[0.0, 1.0], [0.25, 0.5]],
            [[1.0, 0.0], [0.5, 0.25]]
        ],
        "policy": [[0.5, 0.5], [0.5, 0.5]],
        "configuration": uniform_config,
        "initial": [0.5, 0.5],
        "policy_new": [[1.0, 0.0], [0.0, 1.0]],
        "configuration_new": [
            [[0.0, 1.0], [0.0, 1.0]],
            [[1.0, 0.0], [1.0, 0.0]]
        ]
    });
    let path = temp_path("inapplicable.json");
    std::fs::write(&path, serde_json::to_string_pretty(&instance).unwrap()).unwrap();

    let output = run(&["bounds", "--in", path.to_str().unwrap()]);
    assert!(output.status.success(), "{}", stderr(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    for row in report["bounds"].as_array().unwrap() {
        assert_eq!(row["applicable"], false, "row {row}");
        assert!(row["bound_value"].is_null());
        assert_eq!(row["pass"], true);
    }
    // the identity has no applicability condition and must still hold
    assert_eq!(report["identity"]["pass"], true);
    assert!(report["identity"]["residual"].as_f64().unwrap() <= 1e-9);
}
