use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn mpl(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mpl"));
    c.args(args);
    match threads {
        Some(t) => c.env("MPL_THREADS", t),
        None => c.env_remove("MPL_THREADS"),
    };
    c.output().unwrap()
}

fn run_ok(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    let o = mpl(&args, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap()
}

fn values(report: &Value, name: &str) -> Vec<f64> {
    report["quantities"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|q| q["quantity"] == name)
        .map(|q| q["value"].as_f64().unwrap())
        .collect()
}

fn value(report: &Value, name: &str) -> f64 {
    values(report, name)[0]
}

#[test]
fn pressure_of_zero_potential() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_ok("pressure", &configs().join("zero.json"), dir.path(), &[]);
    assert!((value(&r, "pressure") - 2.197225).abs() < 1e-6);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("quantity,value,stderr,method,N\npressure,2.197224577336219"));
}

#[test]
fn duality_at_gibbs_marginals() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_ok("duality", &configs().join("gibbs-marginals.json"), dir.path(), &[]);
    assert!(value(&r, "gap").abs() < 1e-6);
}

#[test]
fn all_methods_on_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_ok("mutual-pressure", &configs().join("benchmark.json"), dir.path(), &[]);
    let v = values(&r, "mutual_pressure");
    assert_eq!(v.len(), 3);
    let limit = (1.0 + std::f64::consts::E).ln() - std::f64::consts::LN_2;
    assert!((v[2] - limit).abs() < 1e-9);
    assert!(v[..2].iter().all(|x| (x - limit).abs() < 0.15));
    assert_eq!(r["agreement"]["exact_mc_agree_3sigma"], true);
}

#[test]
fn budget_overrun_falls_back_in_all_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"potential": {"kind": "diagonal", "d": 3, "n": 3, "beta": 1.0},
            "marginals": ["uniform", "uniform", "uniform"], "N": 30, "budget": 10, "samples": 200}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = mpl(&["mutual-pressure", "--config", cfg.to_str().unwrap(), "--method", "exact", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[nonconvergence]"));
    assert!(!out.exists());
    let r = run_ok("mutual-pressure", &cfg, &out, &["--method", "all"]);
    assert_eq!(values(&r, "mutual_pressure").len(), 2);
    assert!(r["agreement"]["exact_skipped"].is_string());
}

#[test]
fn sanov_rate() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_ok("sanov", &configs().join("sanov.json"), dir.path(), &[]);
    assert!((value(&r, "rate") + 0.1308).abs() < 0.01);
    let last = *values(&r, "log_prob").last().unwrap();
    assert!((last + 0.130812).abs() < 0.01);
    assert_eq!(r["details"]["clause_b"], true);
}

#[test]
fn legendre_of_a_product_measure_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_ok("legendre", &configs().join("legendre-product.json"), dir.path(), &[]);
    assert_eq!(value(&r, "i_sym"), 0.0);
    assert!(value(&r, "legendre_transform").abs() < 1e-10);
}

#[test]
fn remaining_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_ok("entropy", &configs().join("entropy.json"), dir.path(), &["--bits"]);
    assert_eq!(r["units"], "bits");
    assert!((value(&r, "marginal_entropy[0]") - 1.0).abs() < 1e-15);
    let r = run_ok("gibbs", &configs().join("gibbs.json"), dir.path(), &[]);
    assert_eq!(r["details"]["weights"].as_array().unwrap().len(), 6);
    let r = run_ok("equilibrium", &configs().join("equilibrium.json"), dir.path(), &[]);
    assert_eq!(r["details"]["holds"], true);
    let r = run_ok("continuous", &configs().join("continuous-xy.json"), dir.path(), &[]);
    assert!(value(&r, "gap").abs() < 0.02);
    let r = run_ok("continuous", &configs().join("continuous-uniform.json"), dir.path(), &[]);
    assert_eq!(values(&r, "mutual_pressure").len(), 2);
}

#[test]
fn malformed_configs_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        r#"{"potential": {"kind": "zero", "shape": [2]}, "unknown": 1}"#,
        r#"{"potential": {"kind": "zero", "shape": [2]}"#,
        r#"{"potential": {"kind": "table", "shape": [2, 2], "values": [1.0]}}"#,
        r#"{"potential": {"kind": "zero", "shape": [2]}, "sanov": {"reference": [1.0], "target": [1.0], "delta": 0.1, "ns": [1]}}"#,
    ];
    for (k, text) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("bad{k}.json"));
        std::fs::write(&cfg, text).unwrap();
        let o = mpl(&["pressure", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(2), "case {k}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.lines().count(), 1);
        assert!(err.starts_with("error[validation]"));
        assert!(!out.exists());
    }
    let o = mpl(&["pressure", "--config", "/nonexistent.json"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = mpl(&["pressure", "--config", configs().join("zero.json").to_str().unwrap(), "--method", "mc"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_ok("mutual-pressure", &configs().join("benchmark.json"), &dir.path().join("a"), &["--seed", "11"]);
    let echoed = dir.path().join("echo.json");
    std::fs::write(&echoed, serde_json::to_vec(&first["config"]).unwrap()).unwrap();
    let second = run_ok("mutual-pressure", &echoed, &dir.path().join("a"), &[]);
    assert_eq!(mpl_cli::comparable(&first), mpl_cli::comparable(&second));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("benchmark.json");
    let mut reports = Vec::new();
    for t in ["1", "3"] {
        let out = dir.path().join(t);
        let o = mpl(
            &["mutual-pressure", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"],
            Some(t),
        );
        assert!(o.status.success());
        let r: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
        let mut r = mpl_cli::comparable(&r);
        r["config"]["out"] = Value::Null;
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
}
