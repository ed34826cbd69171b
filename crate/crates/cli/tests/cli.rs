use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ofbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ofbm")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    format!("@{}", p.display())
}

#[test]
fn self_similarity_check_exits_zero_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "D.json", "[[0.75,0.2],[0.0,0.6]]");
    let out = ofbm(&["verify", "--check", "self-similarity", "--D", &d, "--c", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["name"], "self-similarity");
    assert_eq!(report["pass"], true);
    assert_eq!(report["params"]["c"], 0.5);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "D.json", "[[0.75,0.2],[0.0,0.6]]");
    let files: Vec<Vec<u8>> = ["p1.csv", "p2.csv"]
        .iter()
        .map(|name| {
            let path = dir.path().join(name);
            let out = ofbm(&["simulate", "--n", "256", "--d", "2", "--D", &d, "--paths", "10", "--seed", "7", "--out", path.to_str().unwrap()]);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            fs::read(path).unwrap()
        })
        .collect();
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path,m,t,x_1,x_2"));
    assert_eq!(lines.count(), 10 * 257);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "D.json", "[[0.7,0.1],[-0.15,0.8]]");
    let run = |threads: &str| ofbm(&["--threads", threads, "simulate", "--n", "300", "--D", &d, "--paths", "5", "--seed", "3"]).stdout;
    assert_eq!(run("1"), run("3"));
}

#[test]
fn scalar_covariance_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "D.json", "0.75");
    let out = ofbm(&["covariance", "--D", &d, "--grid", "0.25,0.5,0.75,1.0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,s,row,col,value"));
    let row = lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[0].parse::<f64>().unwrap() == 1.0 && f[1].parse::<f64>().unwrap() == 1.0)
        .unwrap();
    assert_eq!(format!("{:.9}", row[4].parse::<f64>().unwrap()), "0.666666667");
}

#[test]
fn covariance_json_reparses() {
    let out = ofbm(&["covariance", "--D", "[[0.75,0.2],[0.0,0.6]]", "--grid", "0.5,1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["matrix"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_operator_is_a_validation_error() {
    let out = ofbm(&["simulate", "--D", "[[0.4,0],[0,0.9]]"]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("lambda_D = 0.4") && msg.contains("Lambda_D = 0.9"), "{msg}");
    let out = ofbm(&["simulate", "--D", "[[0.75,0],[0,0.6]]", "--d", "3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn parse_errors_exit_two() {
    assert_eq!(ofbm(&["simulate", "--n", "many"]).status.code(), Some(2));
    assert_eq!(ofbm(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_one() {
    let out = ofbm(&["verify", "--check", "self-similarity", "--D", "0.7", "--tolerance", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"n": 16, "D": [[0.75, 0.2], [0.0, 0.6]], "seed": 4, "format": "json"}"#).unwrap();
    let out = ofbm(&["--config", cfg.to_str().unwrap(), "simulate", "--n", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["n"], 8);
    assert_eq!(doc["d"], 2);
    assert_eq!(doc["generator"]["seed"], 4);
    assert_eq!(doc["paths"][0]["values"].as_array().unwrap().len(), 9);
    fs::write(&cfg, r#"{"nn": 16}"#).unwrap();
    assert_eq!(ofbm(&["--config", cfg.to_str().unwrap(), "simulate"]).status.code(), Some(3));
}

#[test]
fn mds_check_reports_conditions() {
    let out = ofbm(&["mds-check", "--n", "400", "--d", "2", "--generator", "predictable-sign"]);
    assert_eq!(out.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["max_abs_scaled"], 1.0);
    assert_eq!(r["lindeberg_sum"], 0.0);
    let spike = ofbm(&["mds-check", "--n", "400", "--generator", "violating-spike"]);
    assert_eq!(spike.status.code(), Some(1));
}

#[test]
fn several_checks_give_a_report_array() {
    let out = ofbm(&[
        "verify", "--check", "lemma6,tightness", "--D", "[[0.75,0.2],[0.0,0.6]]", "--ladder", "64,128,256", "--n", "256",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let reports: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[1]["name"], "tightness");
}

#[test]
fn bench_table_has_every_size() {
    let out = ofbm(&["bench", "--D", "0.8", "--sizes", "64,128", "--repeats", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("n,d,naive_seconds,fft_seconds,speedup,max_abs_diff"));
}
