use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn bct(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["bct"];
    argv.extend_from_slice(args);
    let code = bct_cli::run(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

const TWO_STATE: &str = r#"{
  "alphabet_size": 2,
  "depth": 1,
  "tree": "(()())",
  "theta": [[0.9, 0.1], [0.2, 0.8]]
}"#;

#[test]
fn fit_on_empty_body_gives_root() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "empty.txt", "");
    let run = bct(&["fit", s(&input), "-D", "0"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = json(&run.stdout);
    assert_eq!(report["map_tree"], "()");
    assert_eq!(report["posterior"].as_f64(), Some(1.0));
    assert!(run.stderr.contains("wall="));
}

#[test]
fn fit_worked_example() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "x.txt", "0 0 1 1\n");
    let run = bct(&["fit", s(&input), "-D", "1", "--beta", "0.5"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = json(&run.stdout);
    assert_eq!(report["map_tree"], "()");
    assert!((report["posterior"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(
        (report["log_prior_predictive"].as_f64().unwrap() - (1.0f64 / 16.0).ln()).abs() < 1e-12
    );
    // Explicit context gives the same data split.
    let explicit = write(&dir, "body.txt", "0 1 1");
    let again = bct(&["fit", s(&explicit), "-D", "1", "--context", "0"]);
    assert_eq!(json(&again.stdout)["posterior"], report["posterior"]);
}

#[test]
fn eval_all_zeros() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "zeros.txt", "0 0 0 0");
    let run = bct(&["eval", s(&input), "-D", "0"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = json(&run.stdout);
    let total = report["total_log_loss"].as_f64().unwrap();
    assert!((total + (35.0f64 / 128.0).ln()).abs() < 1e-12);
    assert!(report["telescoping_gap"].as_f64().unwrap() < 1e-9);
}

#[test]
fn eval_matches_batch_on_longer_input() {
    let dir = TempDir::new().unwrap();
    let symbols: String = (0..5000)
        .map(|i| ((i * 7 + i / 3) % 3).to_string() + " ")
        .collect();
    let input = write(&dir, "x.txt", &symbols);
    let report = json(&bct(&["eval", s(&input), "-m", "3", "-D", "6", "--beta", "0.3"]).stdout);
    let total = report["total_log_loss"].as_f64().unwrap();
    let batch = report["batch_log_prior_predictive"].as_f64().unwrap();
    assert!((total + batch).abs() < 1e-9);
}

#[test]
fn predict_csv_rows_normalize() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "x.txt", "0 1 1 0 1 1 0 1");
    let run = bct(&["predict", s(&input), "-D", "2"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let mut lines = run.stdout.lines();
    assert_eq!(lines.next(), Some("t,symbol,p0,p1,log_loss"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        assert!((row[2] + row[3] - 1.0).abs() < 1e-12);
        let p = row[2 + row[1] as usize];
        assert!((row[4] + p.ln()).abs() < 1e-12);
    }
}

#[test]
fn data_errors_exit_2_with_location() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.txt", "0 1\n1 2 0\n");
    let run = bct(&["eval", s(&input), "-D", "1"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("bad.txt:2:3"), "{}", run.stderr);
    let input = write(&dir, "junk.txt", "0 a");
    assert_eq!(bct(&["fit", s(&input), "-D", "0"]).code, 2);
    let short = write(&dir, "short.txt", "0 1");
    assert_eq!(bct(&["fit", s(&short), "-D", "5"]).code, 2);
}

#[test]
fn config_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "x.txt", "0 1");
    assert_eq!(bct(&["fit", s(&input), "-D", "1", "--beta", "1.5"]).code, 1);
    assert_eq!(bct(&["fit", s(&input), "-D", "1", "-m", "1"]).code, 1);
    assert_eq!(
        bct(&["fit", s(&input), "-D", "2", "--context", "0"]).code,
        1
    );
    assert_eq!(bct(&["fit", s(&input)]).code, 1);
    assert_eq!(bct(&["fit", "/nonexistent/input", "-D", "1"]).code, 1);
    assert_eq!(bct(&["frobnicate"]).code, 1);
    assert_eq!(bct(&["--help"]).code, 0);
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", TWO_STATE);
    let a = bct(&["simulate", "--spec", s(&spec), "-n", "50000", "--seed", "9"]);
    let b = bct(&["simulate", "--spec", s(&spec), "-n", "50000", "--seed", "9"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    let c = bct(&[
        "simulate",
        "--spec",
        s(&spec),
        "-n",
        "50000",
        "--seed",
        "10",
    ]);
    assert_ne!(a.stdout, c.stdout);

    let data = write(&dir, "sim.txt", &a.stdout);
    let fit = json(&bct(&["fit", s(&data), "-D", "5"]).stdout);
    assert_eq!(fit["map_tree"], "(()())");
    assert_eq!(fit["n"], 49_996);
}

#[test]
fn simulate_deterministic_spec_is_constant() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "det.json",
        r#"{"alphabet_size": 2, "depth": 0, "tree": "()", "theta": [[1.0, 0.0]]}"#,
    );
    let run = bct(&["simulate", "--spec", s(&spec), "-n", "200", "--seed", "1"]);
    assert!(run.stdout.split_whitespace().all(|t| t == "0"));
    assert_eq!(run.stdout.split_whitespace().count(), 200);
}

#[test]
fn simulate_refuses_non_ergodic_on_request() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "flip.json",
        r#"{"alphabet_size": 2, "depth": 1, "tree": "(()())", "theta": [[0.0, 1.0], [1.0, 0.0]]}"#,
    );
    let run = bct(&[
        "simulate",
        "--spec",
        s(&spec),
        "-n",
        "10",
        "--seed",
        "1",
        "--require-ergodic",
    ]);
    assert_eq!(run.code, 3, "{}", run.stderr);
    assert_eq!(
        bct(&["simulate", "--spec", s(&spec), "-n", "10", "--seed", "1"]).code,
        0
    );

    let broken = write(&dir, "broken.json", "{\n  \"alphabet_size\": 2,\n  oops\n}");
    let run = bct(&["simulate", "--spec", s(&broken), "-n", "10", "--seed", "1"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("broken.json:3:"), "{}", run.stderr);
}

#[test]
fn verify_quick_and_injected_bug() {
    let start = Instant::now();
    let run = bct(&["verify", "--quick"]);
    assert!(start.elapsed() < Duration::from_secs(10));
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = json(&run.stdout);
    assert!(report["items"]
        .as_array()
        .unwrap()
        .iter()
        .all(|i| i["passed"] == true));

    let run = bct(&["verify", "--quick", "--inject-bug"]);
    assert_eq!(run.code, 4);
    assert!(
        run.stderr.contains("ctw_enumeration_oracle: m=2"),
        "{}",
        run.stderr
    );
    assert_eq!(
        bct(&["verify", "--quick", "--threshold", "nonsense=1"]).code,
        1
    );
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_bct");
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "x.txt", "0 5");
    let status = Command::new(exe)
        .args(["eval", s(&input), "-D", "0"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(exe)
        .args(["eval", s(&input), "-D", "0", "-m", "6"])
        .env("BCT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let status = Command::new(exe)
        .args(["eval", s(&input), "-D", "0", "-m", "6"])
        .env("BCT_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
