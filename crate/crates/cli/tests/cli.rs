use std::path::Path;
use std::process::{Command, Output};

use circloyd::export::{read_eigen, read_fscan, read_lyapunov, read_sweep, read_trace, SweepLine};
use serde_json::Value;

fn circloyd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circloyd"))
        .args(args)
        .env_remove("CIRCLOYD_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = circloyd(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).expect("valid JSON")
}

fn count(doc: &roxmltree::Document, pred: impl Fn(&roxmltree::Node) -> bool) -> usize {
    doc.descendants().filter(|n| pred(n)).count()
}

#[test]
fn exit_codes() {
    assert_eq!(circloyd(&["--help"]).status.code(), Some(0));
    assert_eq!(circloyd(&["sweep", "--help"]).status.code(), Some(0));
    assert_eq!(circloyd(&[]).status.code(), Some(1));
    assert_eq!(circloyd(&["sweep", "--n", "4", "--bogus"]).status.code(), Some(1));
    assert_eq!(circloyd(&["sweep", "--n", "four"]).status.code(), Some(1));
    assert_eq!(circloyd(&["critical-kappa", "--n", "4", "--format", "svg"]).status.code(), Some(1));
    assert_eq!(circloyd(&["step", "--n", "3", "--points", "0,1"]).status.code(), Some(1));
    // domain errors
    assert_eq!(circloyd(&["eigen", "--n", "1", "--kappa", "0"]).status.code(), Some(2));
    assert_eq!(circloyd(&["eigen", "--n", "4", "--kappa=-1"]).status.code(), Some(2));
    let err = circloyd(&["eigen", "--n", "1", "--kappa", "0"]);
    assert!(String::from_utf8_lossy(&err.stderr).starts_with("error:"));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let out = circloyd(&["fscan", "--n", "4", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eigen_uniform_n4() {
    let v = json(&["eigen", "--n", "4", "--kappa", "0"]);
    let eig: Vec<f64> = v["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let want = [1.0, 0.5, 0.0, 0.5];
    for (a, b) in eig.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{eig:?}");
    }
    assert!((v["alpha"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["beta"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(v["stability"]["verdict"], "stable");
}

#[test]
fn eigen_csv_lists_modes() {
    let text = stdout(&["eigen", "--n", "5", "--kappa", "2", "--format", "csv"]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,lambda"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn critical_kappa_reports_no_root() {
    let v = json(&["critical-kappa", "--n", "8", "--kappa-max", "100"]);
    assert_eq!(v["status"], "no_root");
    let max_f = v["max_F"].as_f64().unwrap();
    assert!(max_f < v["bound"].as_f64().unwrap());
}

#[test]
fn sweep_is_deterministic_and_sized() {
    let args = [
        "sweep", "--n", "4", "--kappa-min", "0", "--kappa-max", "10", "--nk", "10", "--iters", "100",
        "--trans", "80", "--seed", "7",
    ];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    let lines = read_sweep(a.as_bytes()).unwrap();
    assert_eq!(lines.len(), 800);
    assert!(lines.iter().all(|l| matches!(l, SweepLine::Point { .. })));
}

#[test]
fn thread_count_does_not_change_output() {
    let base = ["sweep", "--n", "5", "--nk", "6", "--iters", "60", "--trans", "40", "--seed", "3", "--trials", "2"];
    let one = stdout(&[&base[..], &["--threads", "1"]].concat());
    let four = stdout(&[&base[..], &["--threads", "4"]].concat());
    assert_eq!(one, four);
    let lyap = ["lyapunov", "--n", "3", "--kappa-max", "2", "--nk", "3", "--iters", "40", "--trans", "20"];
    assert_eq!(
        stdout(&[&lyap[..], &["--threads", "1"]].concat()),
        stdout(&[&lyap[..], &["--threads", "3"]].concat())
    );
}

#[test]
fn sweep_svg_has_one_circle_per_record() {
    let svg = stdout(&[
        "sweep", "--n", "4", "--nk", "10", "--iters", "100", "--trans", "80", "--seed", "7", "--format", "svg",
    ]);
    let doc = roxmltree::Document::parse(&svg).expect("well-formed SVG");
    assert_eq!(count(&doc, |n| n.has_tag_name("circle")), 800);
}

#[test]
fn fscan_svg_shows_the_boundary() {
    let svg = stdout(&["fscan", "--n", "8", "--format", "svg"]);
    let doc = roxmltree::Document::parse(&svg).expect("well-formed SVG");
    assert!(count(&doc, |n| n.attribute("class") == Some("ref")) >= 1);
    assert_eq!(count(&doc, |n| n.has_tag_name("polyline")), 1);
}

#[test]
fn every_svg_output_parses() {
    let cases: &[&[&str]] = &[
        &["eigen", "--n", "4", "--kappa", "1", "--format", "svg"],
        &["eigen", "--n", "8", "--nk", "5", "--format", "svg"],
        &["lyapunov", "--n", "3", "--kappa", "1", "--iters", "30", "--trans", "10", "--format", "svg"],
        &["sala", "--n", "6", "--format", "svg"],
        &["distortion", "--n", "4", "--kappa", "2", "--format", "svg"],
    ];
    for args in cases {
        let svg = stdout(args);
        roxmltree::Document::parse(&svg).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    }
}

#[test]
fn csv_outputs_round_trip_through_readers() {
    let eig = read_eigen(stdout(&["eigen", "--n", "8", "--nk", "11", "--format", "csv"]).as_bytes()).unwrap();
    assert_eq!(eig.len(), 11);
    for r in &eig {
        assert!(r.lambda_min > -1.0 && r.lambda_min < 1.0);
    }

    let fscan = read_fscan(stdout(&["fscan", "--n", "4", "--nk", "6"]).as_bytes()).unwrap();
    assert_eq!(fscan.len(), 6);
    assert!(fscan.iter().all(|r| r[2] == -1.0 && r[3] == 1.0));
    assert!(fscan[0][1].abs() < 1e-12, "uniform n=4 lambda_min is 0");

    let lyap = read_lyapunov(
        stdout(&["lyapunov", "--n", "3", "--kappa-max", "2", "--nk", "2", "--iters", "40", "--trans", "20"]).as_bytes(),
        3,
    )
    .unwrap();
    assert_eq!(lyap.len(), 2);
    assert!(lyap.iter().all(|(_, ex)| ex[0] >= ex[1] && ex[1] >= ex[2]));

    let trace = read_trace(stdout(&["sala", "--n", "6", "--density", "uniform"]).as_bytes()).unwrap();
    assert!(trace.last().unwrap().residual < 1e-9);
    assert!(trace[0].rho.is_nan() && trace[1].rho.is_nan());
}

#[test]
fn sala_json_reports_convergence() {
    let v = json(&["sala", "--n", "5", "--density", "uniform", "--format", "json"]);
    assert_eq!(v["status"], "converged");
}

#[test]
fn jacobian_matches_circulant_for_uniform() {
    let v = json(&["jacobian", "--n", "5", "--density", "uniform"]);
    assert!(v["max_abs_diff"].as_f64().unwrap() < 1e-6);
}

#[test]
fn step_fixes_equal_spacing() {
    let v = json(&[
        "step", "--n", "4", "--density", "uniform", "--points", "0,1.5707963267948966,3.141592653589793,4.71238898038469",
    ]);
    assert!(v["residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn distortion_orbit_is_monotone() {
    let text = stdout(&["distortion", "--n", "4", "--kappa", "2", "--seed", "5", "--iters", "30"]);
    let mut per_step = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[1] == "0" {
            per_step.push(f[4].parse::<f64>().unwrap());
        }
    }
    assert_eq!(per_step.len(), 31);
    for w in per_step.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let p = path.to_str().unwrap();
    let out = circloyd(&["fscan", "--n", "4", "--nk", "3", "--out", p]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(Path::new(p).exists());
    assert_eq!(read_fscan(std::fs::File::open(p).unwrap()).unwrap().len(), 3);
}
