//! End-to-end checks of the binary: exit codes, output schemas, and the
//! numeric contracts of each subcommand.

use std::f64::consts::PI;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgauss"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn parse_csv(out: &Output) -> Vec<Vec<String>> {
    stdout_str(out)
        .lines()
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect()
}

const SMALL_GRID: &str = "-4:4:1e-3:5:20:10";

#[test]
fn density_semicircle_values() {
    let out = run(&["density", "--q", "0", "--n-points", "3"]);
    assert!(out.status.success());
    let rows = parse_csv(&out);
    assert_eq!(rows[0], vec!["x", "f"]);
    assert_eq!(rows.len(), 4);
    let parsed: Vec<(f64, f64)> = rows[1..]
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    assert_eq!(parsed[0].0, -2.0);
    assert_eq!(parsed[0].1, 0.0);
    assert_eq!(parsed[1].0, 0.0);
    assert!((parsed[1].1 - 1.0 / PI).abs() < 1e-15);
    assert_eq!(parsed[2].0, 2.0);
    assert_eq!(parsed[2].1, 0.0);
}

#[test]
fn density_rejects_out_of_range_q() {
    let out = run(&["density", "--q", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("0.999"), "message must name the valid range: {err}");
}

#[test]
fn density_forms_agree_per_row() {
    let a = run(&["density", "--q", "0.4", "--n-points", "41"]);
    let b = run(&["density", "--q", "0.4", "--n-points", "41", "--form", "theta"]);
    assert!(a.status.success() && b.status.success());
    let ra = parse_csv(&a);
    let rb = parse_csv(&b);
    assert_eq!(ra.len(), rb.len());
    for (x, y) in ra[1..].iter().zip(rb[1..].iter()) {
        let fa: f64 = x[1].parse().unwrap();
        let fb: f64 = y[1].parse().unwrap();
        assert!((fa - fb).abs() <= 1e-9, "rows diverge: {fa} vs {fb}");
    }
}

#[test]
fn density_json_reports_theta_reading() {
    let out = run(&["density", "--q", "0.4", "--n-points", "5", "--form", "theta", "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["theta_form"]["reading"], "one_minus_q_pow_n");
    assert!(doc["theta_form"]["scale"].as_f64().unwrap() - 1.0 < 1e-10);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn certify_semicircle_passes() {
    let out = run(&["certify", "--q", "0", "--grid", SMALL_GRID]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn certify_default_grid_q_zero() {
    // exercises the default 200x100 grid string end to end
    let out = run(&["certify", "--q", "0"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["grid"]["nx"], 200);
    assert_eq!(doc["grid"]["ny"], 100);
    assert_eq!(doc["grid"]["im_spacing"], "logarithmic");
}

#[test]
fn certify_impossible_tolerance_fails() {
    let out = run(&["certify", "--q", "0.5", "--grid", SMALL_GRID, "--tol=-1"]);
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["pass"], false);
    assert!(doc["max_im_phi"].as_f64().unwrap().is_finite());
}

#[test]
fn certify_sweep_emits_one_certificate_per_q() {
    let out = run(&["certify", "--sweep", "0.1:0.9:0.1", "--grid", SMALL_GRID]);
    assert!(out.status.success());
    let docs: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let arr = docs.as_array().unwrap();
    assert_eq!(arr.len(), 9);
    assert!(arr.iter().all(|c| c["pass"] == true));
    assert!((arr[8]["q"].as_f64().unwrap() - 0.9).abs() < 1e-12);
}

#[test]
fn certify_requires_exactly_one_selector() {
    let out = run(&["certify", "--grid", SMALL_GRID]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["certify", "--q", "0.5", "--sweep", "0.1:0.2:0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trace_curve_output_contract() {
    let out = run(&["trace-curve", "--q", "0.5", "--t-max", "5"]);
    assert!(out.status.success());
    let rows = parse_csv(&out);
    assert_eq!(rows[0], vec!["t", "re", "im", "residual", "mirror_re", "mirror_im"]);
    let mut max_residual = 0.0f64;
    for row in &rows[1..] {
        let re: f64 = row[1].parse().unwrap();
        let im: f64 = row[2].parse().unwrap();
        let residual: f64 = row[3].parse().unwrap();
        let mre: f64 = row[4].parse().unwrap();
        let mim: f64 = row[5].parse().unwrap();
        assert!(re >= 0.0 && im <= 1e-12, "quadrant violated: {re},{im}");
        assert!(mre <= 0.0 && mim <= 1e-12, "mirror quadrant violated: {mre},{mim}");
        assert_eq!(mre, -re);
        assert_eq!(mim, im);
        max_residual = max_residual.max(residual);
    }
    assert!(max_residual <= 1e-9);
}

#[test]
fn trace_curve_rejects_q_zero() {
    let out = run(&["trace-curve", "--q", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn theta_report_contract() {
    let out = run(&["theta", "--q", "0.5", "--n-zeros", "5", "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["pass"], true);
    assert!(doc["constant_g"]["re"].as_f64().is_some());
    let checks = doc["zero_checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    for c in checks {
        assert!(c["inner_magnitude"].as_f64().unwrap() <= 1e-10);
        assert!(c["outer_magnitude"].as_f64().unwrap() <= 1e-10);
    }
    assert!(doc["ring"]["max_discrepancy"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn theta_rejects_q_zero() {
    let out = run(&["theta", "--q", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn moments_match_between_oracles() {
    let out = run(&["moments", "--q", "0.5", "--k-max", "6"]);
    assert!(out.status.success());
    let rows = parse_csv(&out);
    assert_eq!(rows[0], vec!["k", "jacobi", "quadrature", "abs_diff"]);
    assert_eq!(rows.len(), 8);
    for row in &rows[1..] {
        let diff: f64 = row[3].parse().unwrap();
        assert!(diff <= 1e-7);
    }
    // m2 = 1 - q
    let m2: f64 = rows[3][1].parse().unwrap();
    assert!((m2 - 0.5).abs() < 1e-12);
}

#[test]
fn transform_eval_phi_matches_reciprocal_at_q_zero() {
    let out = run(&["transform-eval", "--q", "0", "--which", "phi", "--z", "0.0,2.0"]);
    assert!(out.status.success());
    let rows = parse_csv(&out);
    let out_re: f64 = rows[1][2].parse().unwrap();
    let out_im: f64 = rows[1][3].parse().unwrap();
    // 1/(2i) = -0.5i
    assert!(out_re.abs() < 1e-14);
    assert!((out_im + 0.5).abs() < 1e-14);
}

#[test]
fn transform_eval_requires_q_when_needed() {
    let out = run(&["transform-eval", "--which", "phi", "--z", "0.0,2.0"]);
    assert_eq!(out.status.code(), Some(2));
    // semicircle needs no q
    let out = run(&["transform-eval", "--which", "semicircle", "--z", "0.0,1.0"]);
    assert!(out.status.success());
    let rows = parse_csv(&out);
    let out_im: f64 = rows[1][3].parse().unwrap();
    assert!((out_im - (1.0 - 5.0f64.sqrt()) / 2.0).abs() < 1e-14);
}

#[test]
fn output_file_target() {
    let dir = std::env::temp_dir().join("qgauss-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("density.csv");
    let out = run(&["density", "--q", "0.3", "--n-points", "11", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout_str(&out).is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.starts_with("x,f\n"));
    assert_eq!(written.lines().count(), 12);
    std::fs::remove_file(&path).unwrap();
}
