use std::path::Path;
use std::process::{Command, Output};

use qgt::cli::output::{read_table, Summary};

fn qgt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgt")).args(args).output().unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    qgt(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Summary JSON with the fields that legitimately vary between runs removed.
fn payload(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("metadata");
    let config = obj.get_mut("config").unwrap().as_object_mut().unwrap();
    config.remove("out");
    config.remove("workers");
    v
}

#[test]
fn chern_single_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["chern", "--m", "1,5", "--grid", "24x24"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_table(&dir.path().join("chern.csv")).unwrap();
    assert_eq!(header, ["m", "c1_lattice", "c1_direct", "singular_cells"]);
    assert_eq!(rows[0][1], -1.0);
    assert_eq!(rows[1][1], 0.0);
    let raw = std::fs::read_to_string(dir.path().join("chern.csv")).unwrap();
    assert!(raw.lines().nth(1).unwrap().split(',').nth(1) == Some("-1"));
}

#[test]
fn chern_sweep_reports_plateaus_and_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["chern", "--sweep=-3:3:0.1", "--grid", "24x24"]);
    assert_eq!(code(&o), 0);
    let s = Summary::read(&dir.path().join("chern_summary.json")).unwrap();
    let values: Vec<f64> = s.results["plateaus"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["value"].as_f64().unwrap())
        .collect();
    assert_eq!(values, [0.0, 1.0, -1.0, 0.0]);
    let locations: Vec<f64> = s.critical_points.iter().map(|c| c.location).collect();
    assert_eq!(locations.len(), 3);
    for (l, t) in locations.iter().zip([-2.0, 0.0, 2.0]) {
        assert!((l - t).abs() <= 0.1 + 1e-9, "{locations:?}");
    }
    assert!(!s.warnings.is_empty());
}

#[test]
fn output_is_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "4")] {
        let o = run_in(dir.path(), &["field", "--model", "doubled-qwz", "--m", "1", "--grid", "16x16", "--workers", workers]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let o = run_in(dir.path(), &["fs-sweep", "--sweep", "0.5:1.5:0.25", "--grid", "16x16", "--workers", workers]);
        assert_eq!(code(&o), 0);
    }
    for file in ["field_m1.csv", "fs_sweep.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    for file in ["field_summary.json", "fs-sweep_summary.json"] {
        assert_eq!(payload(&a.path().join(file)), payload(&b.path().join(file)));
    }
}

#[test]
fn summary_reproduces_its_own_run() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let o = run_in(first.path(), &["fs-sweep", "--sweep=1:2:0.5", "--grid", "12x12", "--step", "1e-3"]);
    assert_eq!(code(&o), 0);
    let summary = first.path().join("fs-sweep_summary.json");
    let o = run_in(second.path(), &["fs-sweep", "--config", summary.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(first.path().join("fs_sweep.csv")).unwrap(),
        std::fs::read(second.path().join("fs_sweep.csv")).unwrap()
    );
    assert_eq!(payload(&summary), payload(&second.path().join("fs-sweep_summary.json")));
}

#[test]
fn toml_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "model = \"qwz\"\nm = [3.0]\ngrid = \"16x16\"\nstep = 1e-4\n").unwrap();
    let o = run_in(dir.path(), &["chern", "--config", cfg.to_str().unwrap(), "--m", "-1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = Summary::read(&dir.path().join("chern_summary.json")).unwrap();
    assert_eq!(s.config.m, vec![-1.0]);
    assert_eq!(s.config.grid, [16, 16]);
    let (_, rows) = read_table(&dir.path().join("chern.csv")).unwrap();
    assert_eq!(rows[0][1], 1.0);
}

#[test]
fn csv_values_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["field", "--m", "1", "--grid", "8x8", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let (_, rows) = read_table(&dir.path().join("field_m1.csv")).unwrap();
    let o = run_in(dir.path(), &["field", "--m", "1", "--grid", "8x8", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let s = Summary::read(&dir.path().join("field_summary.json")).unwrap();
    let json_rows = s.results["fields"][0]["data"]["rows"].as_array().unwrap();
    assert_eq!(json_rows.len(), rows.len());
    for (csv_row, json_row) in rows.iter().zip(json_rows) {
        for (x, y) in csv_row.iter().zip(json_row.as_array().unwrap()) {
            assert_eq!(x.to_bits(), y.as_f64().unwrap().to_bits());
        }
    }
}

#[test]
fn field_of_constant_model_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["field", "--model", "constant", "--grid", "6x6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_table(&dir.path().join("field_m1.csv")).unwrap();
    assert_eq!(rows.len(), 36);
    assert!(rows.iter().all(|r| r[2..].iter().all(|&v| v == 0.0)));
}

#[test]
fn field_flags_gap_closings() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["field", "--m", "0", "--grid", "8x8"]);
    assert_eq!(code(&o), 0);
    let (_, rows) = read_table(&dir.path().join("field_m0.csv")).unwrap();
    let flagged: Vec<(f64, f64)> = rows.iter().filter(|r| r[7] == 1.0).map(|r| (r[0], r[1])).collect();
    assert_eq!(flagged.len(), 2);
    for (kx, ky) in flagged {
        assert!((kx.cos() + ky.cos()).abs() < 1e-12);
    }
}

#[test]
fn holonomy_order_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["holonomy", "--m", "1", "--center", "1.0,0.5"]);
    assert_eq!(code(&o), 0);
    let s = Summary::read(&dir.path().join("holonomy_summary.json")).unwrap();
    assert!(s.results["order"].as_f64().unwrap() >= 0.9);
    let (header, rows) = read_table(&dir.path().join("holonomy.csv")).unwrap();
    assert_eq!(header, ["side", "residual", "ratio_to_previous"]);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));

    let o = run_in(dir.path(), &["holonomy", "--m", "0", "--center", "0,3.141592653589793"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("3.14159"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["fs-sweep"],
        vec!["fs-sweep", "--sweep", "3:1:0.1"],
        vec!["chern", "--grid", "2x2"],
        vec!["chern", "--method", "analytic", "--model", "doubled-qwz"],
        vec!["field", "--band-range", "0..4"],
        vec!["field", "--format", "xml"],
        vec!["nonsense"],
    ] {
        let o = run_in(dir.path(), &args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&qgt(&["--help"])), 0);
}

#[test]
fn validate_passes_and_detects_mutation() {
    let a = qgt(&["validate"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stdout));
    let b = qgt(&["validate", "--workers", "2"]);
    assert_eq!(a.stdout, b.stdout);
    let bad = qgt(&["validate", "--inject", "flip-curvature"]);
    assert_eq!(code(&bad), 4);
    let report = String::from_utf8_lossy(&bad.stdout);
    for name in ["gauge_covariance", "phase_diagram"] {
        assert!(report.lines().any(|l| l.starts_with(name) && l.contains("FAIL")), "{report}");
    }
    assert!(String::from_utf8_lossy(&bad.stderr).contains("gauge_covariance"));
}

#[test]
fn tabulated_model_reproduces_qwz() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("d.csv");
    let n = 8;
    let mut text = String::from("kx_index,ky_index,d1,d2,d3,eps\n");
    for i in 0..n {
        for j in 0..n {
            let (kx, ky) = (2.0 * std::f64::consts::PI * i as f64 / n as f64, 2.0 * std::f64::consts::PI * j as f64 / n as f64);
            text += &format!("{i},{j},{:e},{:e},{:e},0\n", kx.sin(), ky.sin(), 1.0 + kx.cos() + ky.cos());
        }
    }
    std::fs::write(&table, text).unwrap();
    let model = format!("table:{}", table.display());
    let o = run_in(dir.path(), &["chern", "--model", &model, "--grid", "24x24"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_table(&dir.path().join("chern.csv")).unwrap();
    assert_eq!(rows[0][1], -1.0);
    let o = run_in(dir.path(), &["field", "--model", &model, "--grid", "8x8", "--method", "analytic"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run_in(dir.path(), &["chern", "--model", "table:/nonexistent.csv"]);
    assert_eq!(code(&o), 2);
}
