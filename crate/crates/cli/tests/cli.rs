use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lop")).args(args).output().expect("binary runs")
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).expect("JSON line")).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn figure_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = lop(&["figure", "fig5", "--n", "3,4", "--threshold-ratio", "1.5,2,8", "--trials", "3000", "--out", path_str(d)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json_lines(&out).len(), 2);
    }
    for name in ["fig5_n3.csv", "fig5_n4.csv", "fig5_n3.svg"] {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert_eq!(x, y, "{name}");
    }
    let csv = fs::read_to_string(a.join("fig5_n3.csv")).unwrap();
    assert!(csv.starts_with("threshold_ratio,allanchor_analytic,"));
    assert!(!csv.contains('\r'));
}

#[test]
fn svg_is_regenerable_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = lop(&["figure", "fig3", "--n", "2..4", "--trials", "2000", "--out", path_str(dir.path())]);
    assert!(out.status.success());
    let line = &json_lines(&out)[0];
    assert_eq!(line["curve"], "fig3");
    let csv = fs::read_to_string(dir.path().join("fig3.csv")).unwrap();
    let svg = fs::read_to_string(dir.path().join("fig3.svg")).unwrap();
    let spec = lop_core::plot::PlotSpec {
        title: "LOP vs N (threshold 2·P0, R/r = 100)".into(),
        x_label: "number of anchors N".into(),
        y_label: "LOP".into(),
        x_column: "N".into(),
        y_columns: ["allanchor_analytic", "allanchor_mc", "twoanchor_mc_opt", "lower_bound", "upper_bound"]
            .map(String::from)
            .to_vec(),
        log_y: true,
    };
    assert_eq!(lop_core::plot::svg_from_csv(&csv, &spec).unwrap(), svg);
}

#[test]
fn format_selects_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = lop(&["figure", "fig4", "--n", "3", "--threshold-ratio", "2", "--trials", "500", "--format", "csv", "--out", path_str(dir.path())]);
    assert!(out.status.success());
    assert!(dir.path().join("fig4_e2.csv").exists());
    assert!(!dir.path().join("fig4_e2.svg").exists());
    assert!(json_lines(&out)[0]["svg"].is_null());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    fs::write(&cfg, "seed = 9\ntrials = 1000\n[mc]\nn = 4\ntrials = 2000\n").unwrap();
    let out = lop(&["mc", "--config", path_str(&cfg), "--trials", "1500"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = &json_lines(&out)[0];
    assert_eq!((line["n"].as_u64(), line["trials"].as_u64(), line["seed"].as_u64()), (Some(4), Some(1500), Some(9)));
}

#[test]
fn analytic_and_bounds_values() {
    let out = lop(&["analytic", "--n", "2", "--threshold-ratio", "2"]);
    assert!(out.status.success());
    assert!((json_lines(&out)[0]["lop"][0].as_f64().unwrap() - 0.5).abs() < 1e-6);

    let out = lop(&["bounds", "--n", "3", "--delta", "pi/12"]);
    let line = &json_lines(&out)[0];
    assert!((line["lower"][0].as_f64().unwrap() - 0.583333).abs() < 1e-6);
    assert_eq!(line["lower"][0], line["exact"][0]);
}

#[test]
fn csv_written_only_with_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = lop(&["q-oracle", "--trials", "1000", "--out", path_str(dir.path())]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("q_oracle.csv")).unwrap();
    assert!(csv.starts_with("delta,theta,formula,mc_r,"));
}

#[test]
fn exit_codes() {
    assert_eq!(lop(&["mc", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(lop(&["mc", "--selector", "greedy"]).status.code(), Some(2));
    assert_eq!(lop(&["figure", "fig9"]).status.code(), Some(2));
    assert_eq!(lop(&["analytic", "--config", "/nonexistent/x.ini"]).status.code(), Some(2));

    // output path that is a regular file
    let file = tempfile::NamedTempFile::new().unwrap();
    let out = lop(&["figure", "fig3", "--n", "2", "--trials", "10", "--out", path_str(file.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot create"));
}
