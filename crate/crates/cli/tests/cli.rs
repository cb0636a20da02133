use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const H264: &str = "1,2,1,1\n1,1,-1,-2\n1,-1,-1,2\n1,-2,1,-1\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shiftadd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn optimize_h264() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "h264.csv", H264);
    let json = dir.path().join("g.json");
    let o = run(&["optimize", s(&m), "--dc", "-1", "--out-json", s(&json)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("adders: 8\n"), "{out}");
    assert!(out.contains("equivalent"));
    let g: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(g["stats"]["adders"], 8);
}

#[test]
fn optimize_identity_and_json_matrix() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "id.json", r#"{"rows": [[1, 0], [0, {"mantissa": 1, "exp": 0}]]}"#);
    let o = run(&["optimize", s(&m)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("adders: 0\n"));
}

fn matrix_csv(m: &shiftadd::Matrix) -> String {
    (0..m.rows()).map(|r| m.row(r).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n").collect()
}

#[test]
fn seeded_random_matches_golden_record() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "r.csv", &matrix_csv(&shiftadd::bench::random_matrix(8, 8, 0)));
    let o = run(&["optimize", s(&m), "--dc", "-1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let stats: Vec<&str> = out.lines().take(3).collect();
    assert_eq!(stats, GOLDEN_8X8_SEED0, "{out}");
}

const GOLDEN_8X8_SEED0: [&str; 3] = ["adders: 102", "depth: 9", "cost: 1411"];

#[test]
fn parse_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "bad.csv", "1,0.1\n");
    assert_eq!(run(&["optimize", s(&m)]).status.code(), Some(1));
    let ragged = file(&dir, "ragged.csv", "1,2\n3\n");
    assert_eq!(run(&["optimize", s(&ragged)]).status.code(), Some(1));
    assert_eq!(run(&["optimize", "/nonexistent/m.csv"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let g = file(&dir, "g.json", "{\"nodes\": 3}");
    let v = dir.path().join("o.v");
    assert_eq!(run(&["emit", s(&g), "--verilog", s(&v)]).status.code(), Some(1));
}

#[test]
fn emit_and_verify() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "h264.csv", H264);
    let json = dir.path().join("g.json");
    assert!(run(&["optimize", s(&m), "--input-bits", "4", "--out-json", s(&json)]).status.success());

    let v = dir.path().join("o.v");
    let tb = dir.path().join("tb.v");
    let o = run(&["emit", s(&json), "--verilog", s(&v), "--pipeline-every", "1", "--testbench", s(&tb), "--matrix", s(&m)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let verilog = std::fs::read_to_string(&v).unwrap();
    assert!(verilog.contains("posedge clk"));
    assert!(std::fs::read_to_string(&tb).unwrap().contains("dut"));

    let o = run(&["verify", s(&m), s(&json), "--exhaustive"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("65536"));
    let o = run(&["verify", s(&m), s(&json), "--trials", "100", "--json"]);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["equivalent"], true);
    let o = run(&["verify", s(&m), s(&json), "--exhaustive", "--limit", "1000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("more than the limit"));
}

#[test]
fn corrupted_graph_exits_2() {
    let dir = TempDir::new().unwrap();
    let m = file(&dir, "h264.csv", H264);
    let json = dir.path().join("g.json");
    assert!(run(&["optimize", s(&m), "--out-json", s(&json)]).status.success());
    let mut g: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let out = g["outputs"][1]["sign"].as_i64().unwrap();
    g["outputs"][1]["sign"] = serde_json::json!(-out);
    std::fs::write(&json, g.to_string()).unwrap();
    let o = run(&["verify", s(&m), s(&json)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("MISMATCH"));
}

#[test]
fn bench_json_and_env_threads() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("b.json");
    let o = bin()
        .args(["bench", "--sizes", "2,3", "--trials", "3", "--dc", "0", "--json", s(&json)])
        .env("CMVM_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["records"].as_array().unwrap().len(), 3);
}
