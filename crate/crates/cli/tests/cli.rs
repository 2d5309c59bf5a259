use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qse(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qse"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name]
        .iter()
        .collect();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_report_and_strategy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qse(
        &["solve", "--config", &config("thermal_qubit.json")],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&tmp.path().join("report.json"));
    let emin = report["epsilon_min"].as_f64().unwrap();
    assert!(emin >= 0.0 && emin < report["prior_term"].as_f64().unwrap());
    assert_eq!(report["assessment"]["classification"], "optimal");
    assert!(report["certificate"]["trace_upsilon"].is_number());
    assert_eq!(report["config"]["command"], "solve");

    let strat = json(&tmp.path().join("strategy.json"));
    let n = strat["labels"].as_array().unwrap().len();
    assert_eq!(strat["estimates"].as_array().unwrap().len(), n);
    assert_eq!(strat["pom"]["effects"].as_array().unwrap().len(), n);
}

#[test]
fn sigma_x_is_uninformative() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qse(&["assess", "--config", &config("sigma_x.json")], tmp.path());
    assert!(out.status.success());
    let a = json(&tmp.path().join("assessment.json"));
    assert_eq!(a["classification"], "sub_optimal");
    assert!(a["K"].as_f64().unwrap().abs() <= 1e-12);
    let eps_p = a["epsilon_p"].as_f64().unwrap();
    assert!((a["epsilon_mle"].as_f64().unwrap() - eps_p).abs() <= 1e-9 * eps_p);
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = qse(
            &[
                "simulate",
                "--config",
                &config("simulate.json"),
                "--seed",
                "42",
            ],
            dir,
        );
        assert!(out.status.success());
    }
    let first = std::fs::read_to_string(a.join("trajectories/trajectory_00000.csv")).unwrap();
    assert!(first.starts_with("shot,outcome,estimate,experimental_error\n"));
    assert_eq!(first.lines().count(), 11);
    for rel in [
        "summary.json",
        "trajectories/trajectory_00000.csv",
        "trajectories/trajectory_00019.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(rel)).unwrap(),
            std::fs::read(b.join(rel)).unwrap(),
            "{rel}"
        );
    }
    assert_eq!(json(&a.join("summary.json"))["seed"], 42);
}

#[test]
fn seed_changes_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    qse(
        &[
            "simulate",
            "--config",
            &config("simulate.json"),
            "--seed",
            "1",
        ],
        &a,
    );
    qse(
        &[
            "simulate",
            "--config",
            &config("simulate.json"),
            "--seed",
            "2",
        ],
        &b,
    );
    assert_ne!(
        std::fs::read(a.join("summary.json")).unwrap(),
        std::fs::read(b.join("summary.json")).unwrap()
    );
}

#[test]
fn multishot_table_is_nonincreasing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qse(
        &[
            "multishot-exact",
            "--config",
            &config("multishot.json"),
            "--shots",
            "6",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("multishot_exact.csv")).unwrap();
    let errs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errs.len(), 6);
    assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-10));
}

#[test]
fn bad_input_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{ "grid": { "theta_min": 5.0, "theta_max": 1.0 } }"#,
    )
    .unwrap();
    let out = qse(
        &["solve", "--config", bad.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");

    std::fs::write(&bad, r#"{ "unknown_field": 1 }"#).unwrap();
    let out = qse(
        &["solve", "--config", bad.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(out.status.code(), Some(2));

    let out = qse(
        &["solve", "--config", &config("sigma_x.json")],
        &tmp.path().join("o"),
    );
    assert_eq!(out.status.code(), Some(2), "command mismatch");

    let out = qse(&["simulate", "--shots", "0"], &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
}
