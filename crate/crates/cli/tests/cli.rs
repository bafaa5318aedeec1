use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn jspq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jspq")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn tiny(dir: &Path) {
    fs::write(dir.join("tiny2x2.jsp"), "2 2\n0 3 1 2\n1 2 0 4\n").unwrap();
}

#[test]
fn solve_prints_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    assert_eq!(ok(jspq(dir.path(), &["solve", "--exact", "tiny2x2.jsp"])), "optimal 7\n");
    assert_eq!(ok(jspq(dir.path(), &["solve", "--brute", "tiny2x2.jsp"])), "optimal 7\n");
}

#[test]
fn usage_errors_fail_with_synopsis() {
    let dir = tempfile::tempdir().unwrap();
    let o = jspq(dir.path(), &["solve", "--frobnicate", "x.jsp"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = jspq(dir.path(), &["solve", "missing.jsp"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.jsp"));
}

#[test]
fn bad_values_are_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let o = jspq(dir.path(), &["--out", "o", "generate", "--jobs", "3", "--machines", "3", "--p-min", "5", "--p-max", "2"]);
    assert!(!o.status.success());
    let o = jspq(dir.path(), &["--out", "o", "train", "--dataset", "d.jsonl", "--test-fraction", "1.5"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("test-fraction"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn generate_is_seeded_and_stays_in_out() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "4", "--out", "a", "generate", "--jobs", "4", "--machines", "3", "--count", "2"];
    ok(jspq(dir.path(), &args));
    let mut again = args;
    again[3] = "b";
    ok(jspq(dir.path(), &again));
    let mut names: Vec<String> =
        fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names, ["a", "b"]);
    for name in ["gen4x3_s4.jsp", "gen4x3_s5.jsp"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(name)).unwrap());
    }
}

#[test]
fn features_dump() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    ok(jspq(dir.path(), &["--out", "f", "features", "tiny2x2.jsp"]));
    let text = fs::read_to_string(dir.path().join("f/tiny2x2.features.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(2).unwrap().starts_with("0,1,0.5,1,"));
}

#[test]
fn label_train_eval_search_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(jspq(d, &["--out", "inst", "generate", "--jobs", "4", "--machines", "4", "--count", "2"]));
    let out = ok(jspq(d, &["--out", "data", "label", "inst/gen4x4_s0.jsp", "inst/gen4x4_s1.jsp", "--random", "6"]));
    // Per machine: 1 optimal, 3 adjacent swaps, 6 random.
    assert!(out.starts_with("80 samples"), "{out}");

    let train = ["--out", "model", "train", "--dataset", "data/dataset.jsonl", "--epochs", "2", "--batch-size", "16"];
    ok(jspq(d, &train));
    assert!(d.join("model/weights.bin").exists());
    assert_eq!(fs::read_to_string(d.join("model/metrics.csv")).unwrap().lines().count(), 3);
    let first = fs::read(d.join("model/weights.bin")).unwrap();
    ok(jspq(d, &train));
    assert_eq!(first, fs::read(d.join("model/weights.bin")).unwrap());

    let eval = ok(jspq(
        d,
        &["eval", "--weights", "model/weights.bin", "--dataset", "data/dataset.jsonl", "--tol", "0.05", "--tol", "0.07"],
    ));
    assert_eq!(eval.lines().filter(|l| l.starts_with("wta(")).count(), 2);
    assert!(eval.contains("threshold"));

    let sts = ok(jspq(d, &["search", "inst/gen4x4_s0.jsp", "--max-iter", "30"]));
    assert!(sts.starts_with("gen4x4_s0 makespan"));
    let o = jspq(d, &["search", "inst/gen4x4_s0.jsp", "--algo", "ots"]);
    assert!(!o.status.success());
    let ots = ok(jspq(d, &["search", "inst/gen4x4_s0.jsp", "--algo", "ots", "--oracle", "model/weights.bin", "--json"]));
    let report: serde_json::Value = serde_json::from_str(ots.trim()).unwrap();
    assert!(report["oracle_calls"].as_u64().unwrap() > 0);

    let spec = serde_json::json!({
        "instances": {"files": ["inst/gen4x4_s0.jsp", "inst/gen4x4_s1.jsp"]},
        "algorithms": [{"name": "sTS", "oracle": false}, {"name": "oTS", "oracle": true}],
        "grid": [{"max_nonimproving": 20, "restarts": 1}],
        "seeds": 2,
        "optima": {"exact": {"time_limit_secs": 10.0}},
        "weights": "model/weights.bin",
        "timing": false
    });
    fs::write(d.join("spec.json"), spec.to_string()).unwrap();
    let table = ok(jspq(d, &["--out", "res", "bench", "spec.json"]));
    assert!(table.contains("sTS") && table.contains("oTS"));
    let csv = fs::read_to_string(d.join("res/bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    ok(jspq(d, &["--out", "res2", "bench", "spec.json"]));
    assert_eq!(csv, fs::read_to_string(d.join("res2/bench.csv")).unwrap());
}
