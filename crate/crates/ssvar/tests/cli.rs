use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use ssvar::baselines::ols_var_fit;
use ssvar::cli::{exit_code, EXIT_NUMERIC, EXIT_USAGE};
use ssvar::{build_lag_design, BivariateSeries, Error};

const SMALL: &[&str] = &[
    "--set", "simulation.n_samples=400",
    "--set", "simulation.m_bar=6",
    "--set", "simulation.orders={yy=3,yx=2,xy=0,xx=3}",
    "--set", "simulation.terminal_min=0.3",
    "--set", "simulation.terminal_max=0.4",
];

fn ssvar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssvar"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn ssvar")
}

fn simulate_small(dir: &Path) {
    let mut args = vec!["simulate", "--out", "sim.csv", "--seed", "1"];
    args.extend_from_slice(SMALL);
    let out = ssvar(dir, &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn help_and_usage_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(ssvar(d.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(ssvar(d.path(), &["fit", "--bogus"]).status.code(), Some(2));
    assert_eq!(ssvar(d.path(), &[]).status.code(), Some(2));
}

#[test]
fn numeric_errors_map_to_three() {
    assert_eq!(exit_code(&Error::Numeric("x".into())), EXIT_NUMERIC);
    assert_eq!(exit_code(&Error::Parameter("x".into())), EXIT_USAGE);
}

#[test]
fn simulate_writes_series_truth_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    simulate_small(d.path());
    let f = std::fs::File::open(d.path().join("sim.csv")).unwrap();
    let s = BivariateSeries::read_csv(std::io::BufReader::new(f)).unwrap();
    assert_eq!(s.n_samples(), 400);
    let truth = read_json(&d.path().join("sim.csv.truth.json"));
    assert_eq!(truth["orders"]["yx"], 2);
    let man = read_json(&d.path().join("sim.csv.manifest.json"));
    assert_eq!(man["command"], "simulate");
    assert_eq!(man["seed"], 1);
    assert_eq!(man["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(man["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn bad_config_field_is_named() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), "[params]\nlamda = 0.1\n").unwrap();
    let out = ssvar(d.path(), &["simulate", "--config", "c.toml", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));
}

#[test]
fn empty_config_is_default() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("empty.toml"), "").unwrap();
    let a = ssvar(d.path(), &["simulate", "--config", "empty.toml", "--out", "a.csv"]);
    let b = ssvar(d.path(), &["simulate", "--out", "b.csv"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(std::fs::read(d.path().join("a.csv")).unwrap(), std::fs::read(d.path().join("b.csv")).unwrap());
}

#[test]
fn fit_missing_file_and_bad_params() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(ssvar(d.path(), &["fit", "--input", "nope.csv", "--out", "f.json"]).status.code(), Some(2));
    simulate_small(d.path());
    let out = ssvar(d.path(), &["fit", "--input", "sim.csv", "--out", "f.json", "--lambda", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_ols_matches_library() {
    let d = tempfile::tempdir().unwrap();
    simulate_small(d.path());
    let out = ssvar(d.path(), &["fit", "--input", "sim.csv", "--method", "ols", "--m-bar", "6", "--out", "ols.json"]);
    assert!(out.status.success());
    let json = read_json(&d.path().join("ols.json"));
    let f = std::fs::File::open(d.path().join("sim.csv")).unwrap();
    let s = BivariateSeries::read_csv(std::io::BufReader::new(f)).unwrap();
    let fit = ols_var_fit(&build_lag_design(&s, 6).unwrap()).unwrap();
    let got: Vec<f64> = json["coefficients"]["a_yx"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(got, fit.coefficients.a_yx());
    assert_eq!(json["regularized"], false);
}

#[test]
fn fit_ss_and_ssd_outputs() {
    let d = tempfile::tempdir().unwrap();
    simulate_small(d.path());
    for method in ["ss", "ssd"] {
        let out_name = format!("{method}.json");
        let out = ssvar(
            d.path(),
            &["fit", "--input", "sim.csv", "--method", method, "--m-bar", "6", "--lambda", "0.15", "--out", &out_name],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let json = read_json(&d.path().join(&out_name));
        assert_eq!(json["m_bar"], 6);
        assert_eq!(json["orders"]["xy"], 0);
        let trace = json["trace_file"].as_str().unwrap();
        let rows = std::fs::read_to_string(d.path().join(trace)).unwrap().lines().count();
        assert_eq!(rows as u64, json["iterations"].as_u64().unwrap() + 1);
        assert_eq!(json["denoise"].is_null(), method == "ss");
    }
}

#[test]
fn gc_emits_aligned_traces() {
    let d = tempfile::tempdir().unwrap();
    simulate_small(d.path());
    let out = ssvar(
        d.path(),
        &["gc", "--input", "sim.csv", "--method", "ss,ssd,blockwise", "--m-bar", "6", "--window", "200", "--stride", "100", "--out-dir", "gc"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(d.path().join("gc/gc_trace.csv")).unwrap();
    let mut starts = std::collections::BTreeMap::<String, Vec<String>>::new();
    for line in trace.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        starts.entry(cols[0].to_string()).or_default().push(cols[1].to_string());
    }
    assert_eq!(starts.len(), 3);
    let first = starts.values().next().unwrap().clone();
    assert_eq!(first.len(), 2 * 3);
    assert!(starts.values().all(|s| *s == first));
    let summary = read_json(&d.path().join("gc/gc_summary.json"));
    assert_eq!(summary["methods"].as_array().unwrap().len(), 3);
    assert!(d.path().join("gc/manifest.json").exists());
}

#[test]
fn gc_argument_errors() {
    let d = tempfile::tempdir().unwrap();
    simulate_small(d.path());
    let base = ["gc", "--input", "sim.csv", "--out-dir", "gc", "--m-bar", "6"];
    let run = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        ssvar(d.path(), &a).status.code()
    };
    assert_eq!(run(&["--confidence", "1.5"]), Some(2));
    assert_eq!(run(&["--window", "20"]), Some(2));
    assert_eq!(run(&["--method", "granger"]), Some(2));
}

#[test]
fn sweep_has_one_row_per_point_and_method() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--grid-points", "3", "--seeds", "2", "--lambda", "0.15", "--out", "sweep.csv"];
    args.extend_from_slice(SMALL);
    let out = ssvar(d.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "noise_var,method,nmse,n_seeds");
    assert_eq!(lines.len(), 1 + 3 * 2);
}
