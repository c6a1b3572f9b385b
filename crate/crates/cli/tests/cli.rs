use std::path::PathBuf;
use std::process::{Command, Output};

fn tensor(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../tensors").join(name)
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tensor-spectra"));
    cmd.args(args).env_remove("TENSOR_SPECTRA_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_values(doc: &serde_json::Value) -> Vec<f64> {
    doc["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["value"].as_f64().unwrap())
        .collect()
}

#[test]
fn z_table_for_two_by_two_example() {
    let p = tensor("ex51.tsr");
    let o = run(&["zeig", p.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| l.contains("yes") || l.contains(" no ")).collect();
    assert_eq!(rows.len(), 2, "{out}");
    assert!(rows[0].trim_start().starts_with("23.0000"));
    assert!(rows[1].trim_start().starts_with("25.1000"));
    assert_eq!(out.lines().last(), Some("termination: certified-complete"));
}

#[test]
fn empty_h_spectrum_is_certified() {
    let p = tensor("ex13.tsr");
    let o = run(&["heig", p.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no real H-eigenvalues (certified)"));

    let o = run(&["heig", p.to_str().unwrap(), "--json"], &[]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["eigenvalues"].as_array().unwrap().len(), 0);
    assert_eq!(doc["termination"], "certified-complete");
}

#[test]
fn continuum_exits_with_partial_results() {
    let p = tensor("ex14.tsr");
    let o = run(&["zeig", p.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3));
    let out = stdout(&o);
    assert!(out.contains("continuum-suspected (partial results)"), "{out}");
    assert!(out.contains("0.0000"));
}

#[test]
fn json_field_order_is_fixed() {
    let p = tensor("ex51.tsr");
    let o = run(&["zeig", p.to_str().unwrap(), "--json"], &[]);
    let out = stdout(&o);
    let keys = ["\"kind\"", "\"eigenvalues\"", "\"termination\"", "\"config\"", "\"timings\""];
    let pos: Vec<usize> = keys.iter().map(|k| out.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    let e = ["\"value\"", "\"vectors\"", "\"residual\"", "\"isolated\"", "\"order\""];
    let pos: Vec<usize> = e.iter().map(|k| out.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json_values(&doc).len(), 2);
}

#[test]
fn json_is_byte_identical_across_runs() {
    let p = tensor("ex51.tsr");
    let a = run(&["both", p.to_str().unwrap(), "--json"], &[]);
    let b = run(&["both", p.to_str().unwrap(), "--json"], &[]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Eig {
    value: f64,
    vectors: Vec<Vec<f64>>,
    residual: f64,
    isolated: bool,
    order: usize,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Doc {
    kind: String,
    eigenvalues: Vec<Eig>,
    termination: String,
    config: serde_json::Map<String, serde_json::Value>,
    timings: serde_json::Map<String, serde_json::Value>,
}

#[test]
fn json_round_trips_through_a_parser() {
    let p = tensor("ex51.tsr");
    let o = run(&["heig", p.to_str().unwrap(), "--json"], &[]);
    let text = stdout(&o);
    let doc: Doc = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&doc).unwrap();
    let a: Vec<f64> = doc.eigenvalues.iter().map(|e| e.value).collect();
    let b: Doc = serde_json::from_str(&again).unwrap();
    assert_eq!(a, b.eigenvalues.iter().map(|e| e.value).collect::<Vec<_>>());
    for e in &doc.eigenvalues {
        assert!(text.contains(&serde_json::to_string(&e.value).unwrap()));
    }
    assert_eq!(doc.kind, "H");
}

#[test]
fn text_and_json_agree_on_values() {
    let p = tensor("ex51.tsr");
    let t = stdout(&run(&["heig", p.to_str().unwrap()], &[]));
    let j = run(&["heig", p.to_str().unwrap(), "--json"], &[]);
    let doc: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    let from_json: Vec<String> = json_values(&doc).iter().map(|v| format!("{v:.4}")).collect();
    let from_text: Vec<String> = t
        .lines()
        .skip(2)
        .filter(|l| !l.starts_with("termination"))
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    assert_eq!(from_json, from_text);
    assert_eq!(from_json, vec!["23.0000", "25.1000", "49.2687"]);
}

#[test]
fn both_runs_z_then_h() {
    let p = tensor("ex51.tsr");
    let o = run(&["both", p.to_str().unwrap(), "--json"], &[]);
    let docs: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(docs.len(), 2);
    assert_eq!(docs[0]["kind"], "Z");
    assert_eq!(docs[1]["kind"], "H");
}

#[test]
fn seed_env_overrides_flag() {
    let p = tensor("ex51.tsr");
    let o = run(&["zeig", p.to_str().unwrap(), "--json", "--seed", "5"], &[("TENSOR_SPECTRA_SEED", "11")]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["config"]["seed"], 11);
    let o = run(&["zeig", p.to_str().unwrap()], &[("TENSOR_SPECTRA_SEED", "eleven")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_and_parse_errors_exit_2() {
    let p = tensor("ex51.tsr");
    let p = p.to_str().unwrap();
    assert_eq!(run(&["zeig", p, "--delta=1e-7"], &[]).status.code(), Some(2));
    assert_eq!(run(&["zeig", p, "--rank-tol=0"], &[]).status.code(), Some(2));
    assert_eq!(run(&["eig", p], &[]).status.code(), Some(2));
    assert_eq!(run(&["zeig", "/nonexistent/file.tsr"], &[]).status.code(), Some(2));

    let bad = std::env::temp_dir().join(format!("ts-bad-{}.tsr", std::process::id()));
    std::fs::write(&bad, "3 2 sparse\n1 1 x 2.0\n").unwrap();
    let o = run(&["zeig", bad.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let _ = std::fs::remove_file(bad);
}

#[test]
fn dump_writes_one_file_per_relaxation() {
    let dir = std::env::temp_dir().join(format!("ts-dump-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let p = tensor("ex51.tsr");
    let o = run(&["zeig", p.to_str().unwrap(), "--json", "--dump-sdp", dir.to_str().unwrap()], &[]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let files = std::fs::read_dir(&dir).unwrap().count();
    assert_eq!(files as u64, doc["timings"]["relaxations"].as_u64().unwrap());
    let _ = std::fs::remove_dir_all(dir);
}
