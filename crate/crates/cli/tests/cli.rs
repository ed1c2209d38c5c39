use std::path::Path;
use std::process::{Command, Output};

fn sawlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sawlab")).args(args).current_dir(dir).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: [&str; 8] = ["--N", "100", "--samples", "1000", "--chains", "2", "--seed", "7"];

fn simulate(dir: &Path, ensemble: &str, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--ensemble", ensemble, "--out", out];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    sawlab(&args, dir)
}

#[test]
fn simulate_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (out, workers) in [("a.csv", "1"), ("b.csv", "4")] {
        let o = simulate(dir.path(), "half", out, &["--workers", workers]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("ensemble,theta_deg,weight,within_cutoff,chain_id,attempt\n"));
    assert_eq!(text.lines().count(), 1001);
}

#[test]
fn usage_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), "cube", "x.csv", &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cube"), "{}", stderr(&o));

    let o = sawlab(&["simulate", "--ensemble", "half", "--N", "1", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("N must be at least 2"), "{}", stderr(&o));

    let o = sawlab(&["simulate", "--ensemble", "half", "--samples", "0", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("budget"), "{}", stderr(&o));

    let o = simulate(dir.path(), "half", "missing/x.csv", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not exist"), "{}", stderr(&o));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "ensemble = \"sphere\"\nN = 60\nsamples = 500\nchains = 2\nseed = 4\na = 0.5\nout = \"from-file.csv\"\n",
    )
    .unwrap();
    let o = sawlab(&["simulate", "--config", "run.toml", "--seed", "9"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("from-file.csv.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], 1);
    assert_eq!(meta["config"]["seed"], 9);
    assert_eq!(meta["config"]["n_steps"], 60);
    assert_eq!(meta["config"]["sphere_a"], 0.5);
    assert_eq!(meta["config"]["ensemble"], "sphere");

    std::fs::write(dir.path().join("bad.toml"), "colour = 3\n").unwrap();
    let o = sawlab(&["simulate", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn predict_writes_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = sawlab(&["predict", "--ensemble", "half", "--rw", "--out", "p.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta_deg,cdf"));
    let row60 = lines.nth(60).unwrap();
    let cdf: f64 = row60.split(',').nth(1).unwrap().parse().unwrap();
    assert!((cdf - 0.5 / (1.0 - 85f64.to_radians().cos())).abs() < 1e-14);

    let o = sawlab(
        &["predict", "--ensemble", "half", "--exponents", "nu=0.5,gamma=1,gamma1=0.9", "--out", "q.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = sawlab(&["predict", "--ensemble", "half", "--exponents", "nu=0.5,delta=1", "--out", "q.csv"], dir.path());
    assert!(stderr(&o).contains("unknown exponent 'delta'"), "{}", stderr(&o));
}

#[test]
fn compare_exit_status_reflects_result() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = sawlab(
        &[
            "simulate",
            "--ensemble",
            "half",
            "--rw",
            "--N",
            "400",
            "--samples",
            "20000",
            "--chains",
            "4",
            "--seed",
            "3",
            "--out",
            "s.csv",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(sawlab(&["predict", "--ensemble", "half", "--rw", "--out", "good.csv"], d).status.success());
    assert!(sawlab(
        &["predict", "--ensemble", "half", "--exponents", "nu=0.5,gamma=1,gamma1=0.3", "--out", "bad.csv"],
        d
    )
    .status
    .success());

    let o = sawlab(
        &["compare", "--samples", "s.csv", "--prediction", "good.csv", "--tolerance", "0.02", "--out", "c.csv"],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("c.csv.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert!(summary["max_abs_delta"].as_f64().unwrap() <= 0.02);
    assert!(summary["ks_stat"].is_number());
    let text = std::fs::read_to_string(d.join("c.csv")).unwrap();
    assert!(text.starts_with("theta_deg,cdf_pred,cdf_sim,delta,stderr\n"));

    let o = sawlab(&["compare", "--samples", "s.csv", "--prediction", "bad.csv"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL"));

    std::fs::write(d.join("broken.csv"), "theta,cdf\n1,0.5\n").unwrap();
    std::fs::copy(d.join("good.csv.json"), d.join("broken.csv.json")).unwrap();
    let o = sawlab(&["compare", "--samples", "s.csv", "--prediction", "broken.csv"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'theta'"), "{}", stderr(&o));
}

#[test]
fn validate_rw_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "validate-rw",
        "--N",
        "200",
        "--samples",
        "20000",
        "--chains",
        "4",
        "--seed",
        "5",
        "--b-override",
        "1.2",
        "--out",
        "v",
    ];
    let o = sawlab(&args, dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("v/report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert!(dir.path().join("v/rw-sphere.csv").exists());
}
