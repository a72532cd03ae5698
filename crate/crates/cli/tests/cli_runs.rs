use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isoperim"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, body).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> i32 {
    bin()
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .args(extra)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

#[test]
fn ula_track_ends_at_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ula",
        r#"{"schema": 1, "name": "ula", "mode": "track",
            "algorithm": {"kind": "ula", "eta": 1.0},
            "target": {"kind": "quadratic", "matrix": [[1.0]]}, "k_max": 200}"#,
    );
    assert_eq!(run(&cfg, tmp.path(), &[]), 0);
    let csv = std::fs::read_to_string(tmp.path().join("ula/recursion.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,alpha_k,closed_form,abs_diff"));
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "inf");
    assert_eq!(last[1].parse::<f64>().unwrap(), 2.0);
    assert_eq!(csv.lines().count(), 1 + 201 + 1);
    let summary = std::fs::read_to_string(tmp.path().join("ula/summary.txt")).unwrap();
    assert!(summary.contains("result: PASS"));
}

#[test]
fn proximal_track_limit_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "prox",
        r#"{"schema": 1, "name": "prox", "mode": "track",
            "algorithm": {"kind": "proximal", "eta": 1.0},
            "target": {"kind": "quadratic", "matrix": [[1.0]]}}"#,
    );
    assert_eq!(run(&cfg, tmp.path(), &[]), 0);
    let csv = std::fs::read_to_string(tmp.path().join("prox/recursion.csv")).unwrap();
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(last[1].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn identities_report_worst_gaps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ids",
        r#"{"schema": 1, "name": "ids", "mode": "identities", "seed": 4, "trials": 500}"#,
    );
    assert_eq!(run(&cfg, tmp.path(), &[]), 0);
    let summary = std::fs::read_to_string(tmp.path().join("ids/summary.txt")).unwrap();
    assert!(summary.contains("decomposition_square_worst:"));
    assert!(summary.contains("duality_min_gap_worst:"));
    let csv = std::fs::read_to_string(tmp.path().join("ids/identities.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn failed_check_exits_two() {
    // α⁽⁰⁾ forced to 0 while the chains start with unit variance
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad",
        r#"{"schema": 1, "name": "bad", "mode": "track", "seed": 1,
            "algorithm": {"kind": "ula", "eta": 0.1},
            "target": {"kind": "quadratic", "matrix": [[1.0]]},
            "init": {"kind": "gaussian", "mean": [0.0], "cov": [[1.0]]},
            "alpha0": 0.0, "n_chains": 5000, "n_iters": 1, "record": [0]}"#,
    );
    assert_eq!(run(&cfg, tmp.path(), &[]), 2);
    let summary = std::fs::read_to_string(tmp.path().join("bad/summary.txt")).unwrap();
    assert!(summary.contains("empirical_below_alpha_k: FAIL"));
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let no_seed = write_config(tmp.path(), "ns", r#"{"schema": 1, "name": "ns", "mode": "identities"}"#);
    assert_eq!(run(&no_seed, tmp.path(), &[]), 1);
    // the flag supplies the missing seed
    assert_eq!(run(&no_seed, tmp.path(), &["--seed", "3"]), 0);

    let bad_step = write_config(
        tmp.path(),
        "bs",
        r#"{"schema": 1, "name": "bs", "mode": "track",
            "algorithm": {"kind": "ula", "eta": -1.0},
            "target": {"kind": "quadratic", "matrix": [[1.0]]}}"#,
    );
    assert_eq!(run(&bad_step, tmp.path(), &[]), 1);
    assert_eq!(run(&tmp.path().join("missing.json"), tmp.path(), &[]), 1);
}

#[test]
fn certify_writes_prefixed_certificate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cert",
        r#"{"schema": 1, "name": "cert", "mode": "certify", "seed": 2,
            "algorithm": {"kind": "proximal", "eta": 0.5},
            "target": {"kind": "quadratic", "matrix": [[2.0]]},
            "init": {"kind": "dirac", "point": [1.0]},
            "n_chains": 5000, "n_iters": 5, "write_clouds": true}"#,
    );
    assert_eq!(run(&cfg, tmp.path(), &[]), 0);
    let csv = std::fs::read_to_string(tmp.path().join("cert/certificate.csv")).unwrap();
    assert!(csv.starts_with("fn_id,numerator,denominator,ratio,std_err,pass\n"));
    assert!(csv.lines().any(|l| l.starts_with("pi/lin0,")));
    assert!(csv.lines().any(|l| l.starts_with("lsi/lin0,")));
    let clouds = std::fs::read_to_string(tmp.path().join("cert/clouds.csv")).unwrap();
    assert_eq!(clouds.lines().count(), 1 + 5000);
}
