use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn exmp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exmp"))
        .current_dir(dir)
        .env_remove("EXMP_OUT_DIR")
        .args(args)
        .output()
        .expect("spawn exmp")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = exmp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn out_of_range_time_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "simulate", "--rates", "0,1,1,0", "--y0", "1,0", "--n", "200", "--seed", "1",
        ],
    );
    let out = exmp(d, &["project", "--in", "ensemble.jsonl", "--times", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = exmp(d, &["project", "--in", "ensemble.jsonl", "--times", "0,2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = exmp(d, &["simulate", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = exmp(
        d,
        &[
            "discrete",
            "--sampler",
            "bogus",
            "--y0",
            "1,0",
            "--n",
            "5",
            "--steps",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn broken_factor_fails_check_and_names_residual() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &["ode", "--rates", "0,1,1,0", "--y0", "1,0", "--out", "y.csv"],
    );
    ok(
        d,
        &[
            "semigroup",
            "build",
            "--path",
            "y.csv",
            "--grid-steps",
            "4",
            "--out",
            "q.json",
        ],
    );
    ok(
        d,
        &["semigroup", "check", "--table", "q.json", "--path", "y.csv"],
    );

    let mut table = json(&d.join("q.json"));
    table["factors"][1] = serde_json::json!([1.0, 0.0, 0.0, 1.0]);
    fs::write(d.join("bad.json"), table.to_string()).unwrap();
    let out = exmp(
        d,
        &[
            "semigroup",
            "check",
            "--table",
            "bad.json",
            "--path",
            "y.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
    let failures: Vec<&str> = report["failures"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(failures.contains(&"compatibility_residual"), "{failures:?}");
}

#[test]
fn rerun_with_other_thread_count_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let args = |threads: &'static str, dir: &'static str| {
        vec![
            "--threads",
            threads,
            "--out-dir",
            dir,
            "simulate",
            "--limit",
            "--rates",
            "0,1,1,0",
            "--y0",
            "0.5,0.5",
            "--n",
            "3000",
            "--seed",
            "11",
            "--emit-plot-data",
            "plot.csv",
        ]
    };
    ok(d, &args("1", "a"));
    ok(d, &args("3", "b"));
    for name in ["ensemble.jsonl", "plot.csv", "simulate.manifest.json"] {
        let a = fs::read(d.join("a").join(name)).unwrap();
        let b = fs::read(d.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let manifest = json(&d.join("a/simulate.manifest.json"));
    assert_eq!(manifest["seeds"], serde_json::json!([11]));
    assert!(!manifest.to_string().contains("threads"));
}

#[test]
fn config_file_fills_missing_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("c.json"),
        r#"{"seed": 3, "n": 50, "y0": [0.25, 0.75], "steps": 2, "sampler": "identity"}"#,
    )
    .unwrap();
    ok(d, &["--config", "c.json", "discrete", "--seed", "9"]);
    let manifest = json(&d.join("discrete.manifest.json"));
    assert_eq!(manifest["seeds"], serde_json::json!([9]));
    let trace = json(&d.join("trace.json"));
    assert_eq!(trace["marginals"].as_array().unwrap().len(), 3);
}

#[test]
fn env_var_sets_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = Command::new(env!("CARGO_BIN_EXE_exmp"))
        .current_dir(d)
        .env("EXMP_OUT_DIR", d.join("runs"))
        .args(["fixtures", "threshold", "--y0", "0.501", "--n", "100"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.join("runs/threshold.jsonl").exists());
    assert!(d.join("runs/fixtures-threshold.manifest.json").exists());
}

#[test]
fn discrete_fixed_and_mixture_samplers() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("q.json"), "[[0.9, 0.1], [0.2, 0.8]]").unwrap();
    fs::write(
        d.join("mix.json"),
        r#"{"components": [{"weight": 1, "matrix": [[1, 0], [0, 1]]}, {"weight": 1, "matrix": [[0, 1], [1, 0]]}]}"#,
    )
    .unwrap();
    for sampler in ["fixed:q.json", "mix:mix.json"] {
        let out = ok(
            d,
            &[
                "discrete",
                "--sampler",
                sampler,
                "--y0",
                "0.5,0.5",
                "--n",
                "4000",
                "--steps",
                "5",
                "--verify",
            ],
        );
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["passed"], true, "{sampler}");
        assert_eq!(report["recursion_residual"], 0.0);
    }
}

#[test]
fn pair_fixtures_share_initial_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &["fixtures", "recolor-pair", "--n", "300", "--seed", "7"],
    );
    let first = |name: &str| {
        fs::read_to_string(d.join(name))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    let (x, z) = (first("recolor-x.jsonl"), first("recolor-z.jsonl"));
    let (x, z): (Value, Value) = (
        serde_json::from_str(&x).unwrap(),
        serde_json::from_str(&z).unwrap(),
    );
    assert_eq!(x["initial"], z["initial"]);
    let out = exmp(d, &["fixtures", "feller-pair", "--p", "0.7", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_all_subset_prints_one_line_each() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = ok(d, &["verify-all", "--quick", "--only", "3,6"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("criterion"))
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.ends_with("PASS")));
    let report = json(&d.join("verify-all.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(
        exmp(d, &["verify-all", "--only", "11"]).status.code(),
        Some(2)
    );
}
