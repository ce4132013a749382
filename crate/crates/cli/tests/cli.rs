use std::path::Path;
use std::process::{Command, Output};

fn mcse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcse")).args(args).output().expect("run mcse")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn estimate_prints_json() {
    let out = mcse(&["estimate", "--case", "four-bus", "--method", "m2", "--seed", "2", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["status"], "optimal");
    assert_eq!(v["magnitudes"].as_array().unwrap().len(), 3);
}

#[test]
fn search_trace_and_model_dump() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = mcse(&[
        "estimate",
        "--case",
        "four-bus",
        "--method",
        "s2",
        "--max-nodes",
        "3",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("nodes         3"));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().count(), 3);
    for line in text.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(rec.get("bound").is_some() && rec.get("action").is_some());
    }

    let dump = dir.path().join("model.json");
    let out = mcse(&["estimate", "--case", "four-bus", "--method", "s1", "--dump-model", dump.to_str().unwrap()]);
    assert!(out.status.success());
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert!(model.is_object());
}

#[test]
fn bad_input_fails_cleanly() {
    let out = mcse(&["estimate", "--case", "no-such-case.m"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = mcse(&["estimate", "--case", "four-bus", "--fad", "1.5"]);
    assert!(!out.status.success());
}

fn python3() -> bool {
    Command::new("python3").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn benchmark_writes_outputs_that_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.json");
    std::fs::write(
        &config,
        r#"{"cases": ["four-bus"], "methods": ["m1", "s1"], "seeds": [1, 2, 3]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = mcse(&[
        "benchmark",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("| four-bus | s1 |"));
    let records = std::fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 7);

    if python3() {
        let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/summarize.py");
        let check = Command::new("python3")
            .arg(script)
            .arg(out_dir.join("records.csv"))
            .arg("--check")
            .arg(out_dir.join("summary.csv"))
            .output()
            .unwrap();
        assert!(check.status.success(), "{}", stdout(&check));
    }
}

#[test]
fn sweep_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    std::fs::write(&config, r#"{"seeds": [1], "sweep": {"d": [3, 4], "n_d": [8]}}"#).unwrap();
    let out = mcse(&["sweep", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = stdout(&out);
    assert!(table.contains("| 3 | 8 |") && table.contains("| 4 | 8 |"), "{table}");
}
