//! End-to-end tests of the command-line binary: exit codes, artifact
//! shapes, and byte-level determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

const SIX_POINT_CSV: &str = "\
z1,z2,z3,z4,z5,z6
0,2,2,2,2,2
2,0,1,2,2,2
2,1,0,2,2,2
2,2,2,0,1,1
2,2,2,1,0,1
2,2,2,1,1,0
";

const PATH_CSV: &str = "\
a,b,c
0,1,2
1,0,1
2,1,0
";

const DISCRETE5_CSV: &str = "\
a,b,c,d,e
0,1,1,1,1
1,0,1,1,1
1,1,0,1,1
1,1,1,0,1
1,1,1,1,0
";

fn write_fixture(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ultragap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ultragap"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn validate_ultrametric_exits_zero() {
    let input = write_fixture("six.csv", SIX_POINT_CSV);
    let out = run(&["validate", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "ultrametric");
    assert_eq!(v["points"], 6);
    assert_eq!(v["strong_triangle_violations"].as_array().unwrap().len(), 0);
}

#[test]
fn validate_general_metric_exits_one_with_triples() {
    let input = write_fixture("path.csv", PATH_CSV);
    let out = run(&["validate", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "general-metric");
    let triples = v["strong_triangle_violations"].as_array().unwrap();
    assert_eq!(triples.len(), 1);
    assert_eq!(triples[0]["lhs"], 2.0);
}

#[test]
fn validate_ragged_csv_exits_two() {
    let input = write_fixture("ragged.csv", "a,b\n0,1\n1\n");
    let out = run(&["validate", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn validate_non_metric_exits_three() {
    let input = write_fixture("nonmetric.csv", "a,b,c\n0,1,9\n1,0,1\n9,1,0\n");
    let out = run(&["validate", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn gap_on_six_point_fixture() {
    let input = write_fixture("six.csv", SIX_POINT_CSV);
    let out = run(&["gap", "--input", input.to_str().unwrap(), "--p", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 23.0 / 60.0).abs() < 1e-9);
    assert_eq!(v["partitions_explored"], 31);
    let witness = v["witness"].as_array().unwrap();
    assert_eq!(witness.len(), 6);
    let sum: f64 = witness.iter().map(|x| x.as_f64().unwrap()).sum();
    assert!(sum.abs() < 1e-9);
}

#[test]
fn gap_is_byte_deterministic() {
    let input = write_fixture("six.csv", SIX_POINT_CSV);
    let args = ["gap", "--input", input.to_str().unwrap(), "--p", "2"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    // Worker count must not change the result.
    let c = Command::new(env!("CARGO_BIN_EXE_ultragap"))
        .args(args)
        .env("ULTRAGAP_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn gap_trials_without_seed_is_rejected() {
    let input = write_fixture("six.csv", SIX_POINT_CSV);
    let out = run(&[
        "gap",
        "--input",
        input.to_str().unwrap(),
        "--p",
        "1",
        "--trials",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gap_oracle_bounds_the_solver() {
    let input = write_fixture("six.csv", SIX_POINT_CSV);
    let solver = stdout_json(&run(&[
        "gap",
        "--input",
        input.to_str().unwrap(),
        "--p",
        "1",
    ]));
    let oracle = stdout_json(&run(&[
        "gap",
        "--input",
        input.to_str().unwrap(),
        "--p",
        "1",
        "--trials",
        "20000",
        "--seed",
        "7",
    ]));
    let s = solver["value"].as_f64().unwrap();
    let o = oracle["value"].as_f64().unwrap();
    assert!(o >= s - 1e-9);
    assert!((o - s).abs() < 1e-6);
    assert_eq!(oracle["upper_bound"], true);
}

#[test]
fn gap_on_path_metric_exits_four() {
    let input = write_fixture("path.csv", PATH_CSV);
    let out = run(&["gap", "--input", input.to_str().unwrap(), "--p", "3"]);
    assert_eq!(out.status.code(), Some(4));
    // The violating simplex is serialized on stdout.
    let v = stdout_json(&out);
    assert!(v["gamma"].as_f64().unwrap() < 0.0);
    assert_eq!(v["witness"].as_array().unwrap().len(), 3);
}

#[test]
fn curve_emits_fixed_columns_and_limit_line() {
    let input = write_fixture("six.csv", SIX_POINT_CSV);
    let out = run(&[
        "curve",
        "--input",
        input.to_str().unwrap(),
        "--grid",
        "0,1,2,5,10,20",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,gamma,gamma_over_alpha1_p,residual_to_infinity");
    assert_eq!(lines.len(), 8);
    assert!(lines[7].starts_with("inf,,0.428571428571"));
    let row1: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(row1[0], "1");
    assert!((row1[1].parse::<f64>().unwrap() - 23.0 / 60.0).abs() < 1e-9);
}

#[test]
fn asymptote_prints_exact_rational() {
    let input = write_fixture("six.csv", SIX_POINT_CSV);
    let out = run(&["asymptote", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["gamma_infinity"], "3/7");
    assert!(v["decimal"].as_str().unwrap().starts_with("0.428571428571"));
}

#[test]
fn classify_discrete_five_points() {
    let input = write_fixture("disc5.csv", DISCRETE5_CSV);
    let out = run(&["classify", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["class"], "ScaledDiscrete");
    assert_eq!(v["constant"], true);
    assert_eq!(v["gamma_zero"], "5/12");
    assert_eq!(v["gamma_infinity"], "5/12");
}

#[test]
fn verify_certifies_a_valid_constant() {
    let input = write_fixture("six.csv", SIX_POINT_CSV);
    let out = run(&[
        "verify",
        "--input",
        input.to_str().unwrap(),
        "-g",
        "0.3",
        "--p",
        "1",
        "--trials",
        "100",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["holds"], true);
    assert_eq!(v["sample_violations"], 0);

    let out = run(&[
        "verify",
        "--input",
        input.to_str().unwrap(),
        "-g",
        "0.45",
        "--p",
        "1",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["holds"], false);
    assert!(v["witness"].is_array());
}

#[test]
fn out_flag_writes_the_artifact() {
    let input = write_fixture("six.csv", SIX_POINT_CSV);
    let target = write_fixture("gap-out.json", "");
    let out = run(&[
        "gap",
        "--input",
        input.to_str().unwrap(),
        "--p",
        "0",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
}

#[test]
fn json_dendrogram_input_round_trips() {
    let json = r#"{
        "labels": ["z1", "z2", "z3", "z4", "z5", "z6"],
        "levels": [
            {"height": 1, "blocks": [[0], [1, 2], [3, 4, 5]]},
            {"height": 2, "blocks": [[0, 1, 2, 3, 4, 5]]}
        ]
    }"#;
    let input = write_fixture("six.json", json);
    let out = run(&[
        "asymptote",
        "--input",
        input.to_str().unwrap(),
        "--format",
        "json-dendrogram",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["gamma_infinity"], "3/7");
}
