use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randorder")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn identical_channels_hold() {
    let id = fixture("channel_identity.json");
    let o = run(&["check-order", &id, &id]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["status"], "Holds");
}

#[test]
fn identity_below_depolarizing_fails() {
    let o = run(&["check-order", &fixture("channel_identity.json"), &fixture("channel_depolarizing.json")]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["status"], "Fails");
}

#[test]
fn depolarizing_is_below_identity_in_either_format() {
    let o = run(&["check-order", &fixture("channel_depolarizing_choi.json"), &fixture("channel_identity.json")]);
    assert_eq!(code(&o), 0);
    let o = run(&[
        "check-equiv",
        &fixture("channel_depolarizing.json"),
        &fixture("channel_depolarizing_choi.json"),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("direction,status,residual,iterations"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn malformed_json_is_a_usage_error() {
    let bad = fixture("malformed.json");
    let o = run(&["check-order", &bad, &fixture("channel_identity.json")]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("malformed.json") && err.contains("malformed JSON"), "{err}");
}

#[test]
fn shape_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"d_in":2,"d_out":2,"kind":"kraus","data":[[[1,0]]]}"#).unwrap();
    let o = run(&["conjugate", p.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("$.data[0]"), "{err}");
}

#[test]
fn unknown_subcommand_and_missing_file() {
    assert_eq!(code(&run(&["frobnicate"])), 3);
    assert_eq!(code(&run(&["conjugate", "/nonexistent/x.json"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn minsuf_duplicate_is_trivial() {
    let o = run(&["minsuf", &fixture("experiment_duplicate.json"), "--depth", "1"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["algebra_dim"], 1);
    assert_eq!(r["block_structure"], serde_json::json!([[1, 2]]));
    assert_eq!(r["reduced_experiment"]["d"], 1);
    assert_eq!(r["equivalence"]["reduced_le_original"]["status"], "Holds");
    assert_eq!(r["equivalence"]["original_le_reduced"]["status"], "Holds");
}

#[test]
fn minsuf_generic_pair_is_full_matrix_algebra() {
    let o = run(&["minsuf", &fixture("experiment_generic_qubit.json"), "--depth", "1"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["algebra_dim"], 4);
    assert_eq!(r["block_structure"], serde_json::json!([[2, 1]]));
    assert_eq!(r["reduced_experiment"]["d"], 2);
}

#[test]
fn depth_zero_fingerprint_is_the_empty_word() {
    let o = run(&["fingerprint", &fixture("experiment_generic_qubit.json"), "--depth", "0"]);
    assert_eq!(code(&o), 0);
    let values = json(&o)["values"].as_object().unwrap().clone();
    assert_eq!(values.len(), 1);
    assert_eq!(values[""], serde_json::json!([1.0, 0.0]));
}

#[test]
fn amplifier_suite_filter() {
    let o = run(&["amplifier", "--suite", "kekka", "--fock-dim", "16", "--kraus-cutoff", "16"]);
    assert_eq!(code(&o), 0);
    let rows = json(&o);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["check"] == "kekka" && r["pass"] == true));
}

#[test]
fn amplifier_under_truncation_warns() {
    let o = run(&["amplifier", "--fock-dim", "6", "--kraus-cutoff", "6", "--suite", "truncation", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("truncation,") && l.ends_with(",true")), "{text}");
}

#[test]
fn amplifier_rejects_unknown_check() {
    assert_eq!(code(&run(&["amplifier", "--suite", "nope"])), 3);
}

#[test]
fn threegap_golden_sweep() {
    let o = run(&["threegap", "--k-list", "1,10,100,1000"]);
    assert_eq!(code(&o), 0);
    let rows = json(&o);
    let gaps: Vec<f64> = rows.as_array().unwrap().iter().map(|r| r["max_gap"].as_f64().unwrap()).collect();
    assert_eq!(gaps[0], 1.0);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(rows.as_array().unwrap().iter().all(|r| r["distinct_gaps"].as_u64().unwrap() <= 3));
}

#[test]
fn threegap_rational_alpha_is_degenerate() {
    let o = run(&["threegap", "--alpha", "0.5", "--k-list", "3,4"]);
    let rows = json(&o);
    for r in rows.as_array().unwrap() {
        assert_eq!(r["degenerate"], true);
        assert_eq!(r["distinct_gaps"], 1);
        assert_eq!(r["max_gap"], 0.5);
    }
}

#[test]
fn markov_depolarizing_rows() {
    let o = run(&[
        "markov",
        &fixture("experiment_generic_qubit.json"),
        "--family",
        "depolarizing",
        "--t-list",
        "0.5,1,2",
    ]);
    assert_eq!(code(&o), 0);
    let rows = json(&o);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r["step_status"] == "Holds"));
}

#[test]
fn out_flag_writes_file_and_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let exp = fixture("experiment_generic_qubit.json");
    for p in [&a, &b] {
        let o = run(&["minsuf", &exp, "--depth", "2", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        assert!(o.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn conjugate_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.json");
    let o = run(&["conjugate", &fixture("channel_depolarizing.json"), "--out", c.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let cc = dir.path().join("cc.json");
    assert_eq!(code(&run(&["conjugate", c.to_str().unwrap(), "--out", cc.to_str().unwrap()])), 0);
    let o = run(&["check-equiv", &fixture("channel_depolarizing.json"), cc.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
}
