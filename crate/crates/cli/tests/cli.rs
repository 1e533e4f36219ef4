use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tqopen"));
    c.env_remove("TQOPEN_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_json(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn solve_preset(dir: &Path, preset: &str) -> PathBuf {
    let path = dir.join(format!("{preset}.json"));
    let out = run(&["solve", &format!("--{preset}"), "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    path
}

#[test]
fn table_one_record_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = solve_preset(dir.path(), "table1");
    let rec = read_json(&path);
    assert_eq!(rec["schema_version"], 1);
    assert_eq!(rec["config"]["xi_squared"], 3.0);
    assert_eq!(rec["levels"].as_array().unwrap().len(), 8);
    assert_eq!(rec["summary"]["all_solved"], true);
    let root = &rec["levels"][0]["bethe_roots"][0];
    assert!(root["re"].is_f64() && root["im"].is_f64());

    let out = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));

    let md = run(&["table", path.to_str().unwrap(), "--format", "md"]);
    assert_eq!(code(&md), 0);
    let text = stdout(&md);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[2], "| -10.4854 | -0.301706, -0.228269, 1.90659 |");
    assert_eq!(lines[9], "| 9.78493 | -0.5 + 2.6417i, 1.75921 ± 1.91745i |");
    let again = run(&["table", path.to_str().unwrap(), "--format", "md"]);
    assert_eq!(md.stdout, again.stdout);

    let csv = stdout(&run(&["table", path.to_str().unwrap(), "--format", "csv"]));
    assert_eq!(csv.lines().next(), Some("E,Bethe roots"));
    assert_eq!(
        csv.lines().nth(1),
        Some("-10.4854,\"-0.301706, -0.228269, 1.90659\"")
    );
}

#[test]
fn table_two_preset() {
    let dir = tempfile::tempdir().unwrap();
    let path = solve_preset(dir.path(), "table2");
    assert_eq!(read_json(&path)["levels"].as_array().unwrap().len(), 16);
    let text = stdout(&run(&["table", path.to_str().unwrap()]));
    assert_eq!(
        text.lines().last(),
        Some("| 10.8455 | 0.613599 ± 3.18391i, 2.74696 ± 2.01537i |")
    );
    assert!(text.contains("| -11.7918 | -0.5 + 0.929239i, -0.267373, -0.239061, 2.63465 |"));
}

#[test]
fn diagonal_boundary_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.json");
    let out = run(&[
        "solve",
        "--n",
        "3",
        "--p",
        "1",
        "--q",
        "1",
        "--xi",
        "0",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("diagonal"));
    assert!(!path.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_configurations() {
    assert_eq!(code(&run(&["solve", "--n", "3", "--p", "1"])), 2);
    assert_eq!(code(&run(&["solve", "--n", "1", "--seed", "0"])), 2);
    assert_eq!(code(&run(&["solve", "--n", "11", "--seed", "0"])), 2);
    assert_eq!(code(&run(&["solve", "--table1", "--tol-tq", "0"])), 2);
    assert_eq!(code(&run(&["solve", "--table1", "--n", "3"])), 2);
    assert_eq!(
        code(&run(&["solve", "--n", "3", "--seed", "0", "--sign", "x"])),
        2
    );
    assert_eq!(code(&run(&["fusion", "--max-s", "9"])), 2);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["solve", "--n", "2", "--seed", "4", "--sign", "-"])
        .env("TQOPEN_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let rec = read_json(&dir.path().join("solve_n2.json"));
    assert_eq!(rec["config"]["seed"], 4);
    assert_eq!(rec["config"]["sign"], "-");
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = solve_preset(dir.path(), "table1");
    let mut rec = read_json(&path);
    let re = rec["levels"][3]["bethe_roots"][1]["re"].as_f64().unwrap();
    rec["levels"][3]["bethe_roots"][1]["re"] = (re + 0.01).into();
    let bad = dir.path().join("bad.json");
    write_json(&bad, &rec);
    let out = run(&["verify", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("level 3:"), "{}", stdout(&out));

    let mut rec = read_json(&path);
    rec["levels"][0]["energy_direct"] = (-10.0).into();
    write_json(&bad, &rec);
    assert_eq!(code(&run(&["verify", bad.to_str().unwrap()])), 3);
}

#[test]
fn verify_accepts_published_roots_at_their_precision() {
    let table: [&[(f64, f64)]; 8] = [
        &[(-0.301706, 0.0), (-0.228269, 0.0), (1.90659, 0.0)],
        &[(-0.202149, 0.0), (0.0000179, 0.0760986), (0.0000179, -0.0760986)],
        &[(-0.5, -1.36473), (-0.234301, 0.0), (1.80106, 0.0)],
        &[(-0.5, -1.35297), (-0.278630, 0.0), (1.79670, 0.0)],
        &[(-0.244206, 0.0), (0.829712, 0.0), (1.99163, 0.0)],
        &[(-0.257109, 0.0), (0.816209, 0.0), (1.99041, 0.0)],
        &[(1.79880, 0.0), (-0.064122, 0.726059), (-0.064122, -0.726059)],
        &[(-0.5, 2.64170), (1.75921, 1.91745), (1.75921, -1.91745)],
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = solve_preset(dir.path(), "table1");
    let mut rec = read_json(&path);
    rec["config"]["tol_tq"] = 1e-3.into();
    rec["config"]["tol_energy"] = 1e-3.into();
    for (k, roots) in table.iter().enumerate() {
        let list: Vec<Value> = roots
            .iter()
            .map(|&(re, im)| serde_json::json!({"re": re, "im": im}))
            .collect();
        rec["levels"][k]["bethe_roots"] = Value::Array(list);
    }
    let loose = dir.path().join("published.json");
    write_json(&loose, &rec);
    let out = run(&["verify", loose.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));

    rec["config"]["tol_tq"] = 1e-8.into();
    write_json(&loose, &rec);
    assert_eq!(code(&run(&["verify", loose.to_str().unwrap()])), 3);
}

#[test]
fn schema_version_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let path = solve_preset(dir.path(), "table1");
    let mut rec = read_json(&path);
    rec["schema_version"] = 99.into();
    let other = dir.path().join("v99.json");
    write_json(&other, &rec);
    let out = run(&["table", other.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema version 99"));
    assert_eq!(code(&run(&["verify", other.to_str().unwrap()])), 2);

    rec["schema_version"] = 1.into();
    rec["levels"] = Value::Array(vec![]);
    let empty = dir.path().join("empty.json");
    write_json(&empty, &rec);
    let out = run(&["table", empty.to_str().unwrap()]);
    assert_eq!(stdout(&out), "| E | Bethe roots |\n|---|---|\n");
}

#[test]
fn incomplete_scan_reports_failures() {
    // Two low-lying levels of this draw have no single-Q solution of the
    // required form on either branch.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n6.json");
    let out = run(&[
        "solve",
        "--n",
        "6",
        "--seed",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", stdout(&out));
    let rec = read_json(&path);
    assert_eq!(rec["summary"]["all_solved"], false);
    let failures = rec["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 2);
    assert!(failures
        .iter()
        .all(|f| f["opposite_sign_residual"].as_f64().unwrap() > 1e-6));

    let out = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("2 unsolved levels skipped"));
    let table = stdout(&run(&["table", path.to_str().unwrap()]));
    assert_eq!(table.matches("unsolved").count(), 2);
}

#[test]
fn fusion_checks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    let out = run(&[
        "fusion",
        "--max-s",
        "4",
        "--seed",
        "9",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("term counts: 1, 3, 8, 21, 55"));
    let rep = read_json(&path);
    assert_eq!(rep["seed"], 9);
    assert_eq!(rep["passed"], true);
    assert_eq!(rep["reduction_ok"], true);

    assert_eq!(
        code(&run(&["fusion", "--max-s", "1", "--out", path.to_str().unwrap()])),
        0
    );

    let out = run(&[
        "fusion",
        "--max-s",
        "1",
        "--corrupt-t2",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4);
    let rep = read_json(&path);
    let failure = &rep["failures"][0];
    assert_eq!(failure["s"], 1);
    assert!(failure["u"].is_f64() && failure["q_coefficients"].is_array());
}
