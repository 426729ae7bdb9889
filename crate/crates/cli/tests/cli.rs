use std::path::Path;
use std::process::Command;

use ltm_cli::{run, EXIT_ASSERTION, EXIT_OK, EXIT_PRECONDITION};
use serde_json::Value;

fn ltm(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["ltm", "--output-dir", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn thresholds_lists_alpha0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ltm(dir.path(), &["thresholds"]), EXIT_OK);
    let v = read_json(&dir.path().join("thresholds.json"));
    let a0 = v["thresholds"]["alpha0"]["value"].as_f64().unwrap();
    assert!((a0 - 2.1319).abs() < 5e-5);
    assert_eq!(v["thresholds"].as_object().unwrap().len(), 8);
}

#[test]
fn growth_verifier_passes_and_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["verify", "--lemma", "growth", "--alpha", "2.5", "--samples", "600"];
    assert_eq!(ltm(a.path(), &args), EXIT_OK);
    assert_eq!(ltm(b.path(), &args), EXIT_OK);
    let ja = std::fs::read(a.path().join("verify_growth.json")).unwrap();
    let jb = std::fs::read(b.path().join("verify_growth.json")).unwrap();
    assert_eq!(ja, jb);
    let v: Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["passes"], 600);
    assert_eq!(v["failure_count"], 0);
}

#[test]
fn seed_changes_the_report() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["verify", "--lemma", "3", "--alpha", "2.5", "--samples", "50"];
    assert_eq!(ltm(a.path(), &args), EXIT_OK);
    let mut other = vec!["--seed", "7"];
    other.extend_from_slice(&args);
    assert_eq!(ltm(b.path(), &other), EXIT_OK);
    let va = read_json(&a.path().join("verify_lemma3.json"));
    let vb = read_json(&b.path().join("verify_lemma3.json"));
    assert_eq!(va["seed"], 42);
    assert_eq!(vb["seed"], 7);
}

#[test]
fn partition_exports_csv_for_both_maps() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        ltm(
            dir.path(),
            &["partition", "--alpha", "2.8", "--k-max", "15", "--samples", "2000"]
        ),
        EXIT_OK
    );
    for side in ["f", "g"] {
        let csv = std::fs::read_to_string(dir.path().join(format!("partition_{side}.csv"))).unwrap();
        assert!(csv.starts_with("# ltm partition"));
        assert!(csv.contains("alpha=2.8"));
        assert!(csv.lines().any(|l| l.starts_with("label,")));
    }
    let v = read_json(&dir.path().join("partition.json"));
    assert_eq!(v["partitions"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["k_max"], 15);
}

#[test]
fn trace_classifies_and_reports_budget_exhaustion() {
    let dir = tempfile::tempdir().unwrap();
    let ok = [
        "trace", "--alpha", "2.5", "--x0", "0.2", "--y0", "0.2", "--x1", "0.1999", "--y1", "0.205",
    ];
    assert_eq!(ltm(dir.path(), &ok), EXIT_OK);
    let v = read_json(&dir.path().join("trace.json"));
    assert_eq!(v["result"]["outcome"], "C1");

    // crosses A1 and A4 where 1/E1 + 1/E4 > 1, so one step cannot decide it
    let short = [
        "trace", "--alpha", "2.02", "--x0", "0.3", "--y0", "0.08", "--x1", "0.2999", "--y1", "0.1", "--budget", "1",
    ];
    assert_eq!(ltm(dir.path(), &short), EXIT_ASSERTION);
    let v = read_json(&dir.path().join("trace.json"));
    assert_eq!(v["result"]["outcome"], "Budget");
}

#[test]
fn preconditions_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(
        ltm(p, &["verify", "--lemma", "growth", "--alpha", "3.5"]),
        EXIT_PRECONDITION
    );
    assert_eq!(
        ltm(p, &["verify", "--lemma", "growth", "--alpha", "2.0"]),
        EXIT_PRECONDITION
    );
    assert_eq!(ltm(p, &["verify", "--lemma", "2"]), EXIT_PRECONDITION);
    assert_eq!(
        ltm(p, &["verify", "--lemma", "1", "--alpha", "2.11"]),
        EXIT_PRECONDITION
    );
    assert_eq!(ltm(p, &["partition", "--k-max", "3"]), EXIT_PRECONDITION);
    assert_eq!(
        ltm(p, &["verify", "--lemma", "growth", "--samples", "0"]),
        EXIT_PRECONDITION
    );
    // not in the unstable cone
    let bad = ["trace", "--x0", "0.1", "--y0", "0.1", "--x1", "0.2", "--y1", "0.1"];
    assert_eq!(ltm(p, &bad), EXIT_PRECONDITION);
    // outside S
    let out = ["trace", "--x0", "0.1", "--y0", "0.5", "--x1", "0.1", "--y1", "0.6"];
    assert_eq!(ltm(p, &out), EXIT_PRECONDITION);
    assert_eq!(
        ltm(p, &["figure", "--id", "fig2", "--alpha", "3.2", "--out", "x.svg"]),
        EXIT_PRECONDITION
    );
}

#[test]
fn figure_is_written_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a/fig2.svg");
    let b = dir.path().join("b/fig2.svg");
    assert_eq!(
        ltm(
            dir.path(),
            &["figure", "--id", "fig2", "--alpha", "2.8", "--out", a.to_str().unwrap()]
        ),
        EXIT_OK
    );
    assert_eq!(
        ltm(dir.path(), &["figure", "--id", "fig2", "--out", b.to_str().unwrap()]),
        EXIT_OK
    );
    let sa = std::fs::read(&a).unwrap();
    assert_eq!(sa, std::fs::read(&b).unwrap());
    assert!(String::from_utf8(sa).unwrap().contains("alpha=2.8"));
}

#[test]
fn lyapunov_reports_estimate() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        ltm(dir.path(), &["lyapunov", "--alpha", "2.5", "--iters", "20000"]),
        EXIT_OK
    );
    let v = read_json(&dir.path().join("lyapunov.json"));
    assert!(v["estimate"]["lambda"].as_f64().unwrap() > 0.05);
    assert_eq!(v["estimate"]["samples"].as_array().unwrap().len(), 8);
    assert_eq!(ltm(dir.path(), &["lyapunov", "--iters", "10"]), EXIT_PRECONDITION);
}

#[test]
fn report_runs_every_suite() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["report", "--alpha", "2.5", "--samples", "100", "--iters", "20000"];
    assert_eq!(ltm(dir.path(), &args), EXIT_OK);
    let v = read_json(&dir.path().join("report.json"));
    assert_eq!(v["passed"], true);
    let ids: Vec<&str> = v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["id"].as_str().unwrap())
        .collect();
    assert_eq!(
        ids,
        [
            "thresholds",
            "partition_f",
            "partition_g",
            "periodic",
            "lemma1",
            "lemma3",
            "growth",
            "pipeline",
            "lyapunov"
        ]
    );
}

#[test]
fn binary_honours_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_ltm");
    let run_with = |threads: &str, sub: &str| {
        Command::new(bin)
            .env("LTM_THREADS", threads)
            .args(["--output-dir", dir.path().join(sub).to_str().unwrap()])
            .args(["verify", "--lemma", "growth", "--samples", "300"])
            .output()
            .unwrap()
    };
    let one = run_with("1", "one");
    assert_eq!(one.status.code(), Some(EXIT_OK));
    let four = run_with("4", "four");
    assert_eq!(four.status.code(), Some(EXIT_OK));
    assert_eq!(
        std::fs::read(dir.path().join("one/verify_growth.json")).unwrap(),
        std::fs::read(dir.path().join("four/verify_growth.json")).unwrap()
    );
    let bad = run_with("0", "bad");
    assert_eq!(bad.status.code(), Some(EXIT_PRECONDITION));
    let stderr = String::from_utf8(bad.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
}
