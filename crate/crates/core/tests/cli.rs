use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qnet_privacy::cli::Report;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qnet-privacy"));
    cmd.env("NO_COLOR", "1");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn read_report(path: &Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_writes_a_round_trippable_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&[
        "analyze",
        "--config",
        scenario("ghz_average_d3.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let report: Report = serde_json::from_str(&text).unwrap();
    assert_eq!(
        serde_json::from_str::<Report>(&serde_json::to_string(&report).unwrap()).unwrap(),
        report
    );
    let q = report.body.qfim.unwrap();
    assert_eq!((q.rows, q.cols, q.order.as_str()), (3, 3, "row_major"));
    assert!((q.at(1, 2) - 1.0).abs() < 1e-8);
    assert!(!text.contains("NaN") && !text.contains("inf"));
}

#[test]
fn certify_exit_codes() {
    let good = run(&[
        "certify",
        "--config",
        scenario("mixed_private_d2.json").to_str().unwrap(),
    ]);
    assert_eq!(good.status.code(), Some(0));
    let bad = run(&[
        "certify",
        "--config",
        scenario("product_probe_d3.json").to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    let report: Report = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(report.body.certified, Some(false));
}

#[test]
fn invalid_input_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let out = dir.path().join("out.json");
    for text in [
        "{ not json",
        r#"{"name": "x", "d": 2, "initial_state": {"kind": "ghz"}, "extra": true}"#,
        r#"{"name": "x", "d": 2, "theta": [1.0], "initial_state": {"kind": "ghz"}}"#,
        r#"{"name": "x", "d": 2, "initial_state": {"kind": "ghz"}, "noise": {"channel": "dephasing", "eta": [1.5]}}"#,
        r#"{"name": "x", "d": 2, "initial_state": {"kind": "ghz"}, "noise": {"channel": "dephasing", "locality": "global_map"}}"#,
    ] {
        std::fs::write(&cfg, text).unwrap();
        let o = run(&[
            "noise-sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(o.stdout.is_empty());
        assert!(!out.exists() && !out.with_extension("csv").exists());
    }
    let o = run(&[
        "analyze",
        "--config",
        scenario("ghz_average_d3.json").to_str().unwrap(),
        "--tol",
        "-1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["analyze", "--config", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn task_mismatch_is_invalid() {
    let o = run(&[
        "analyze",
        "--config",
        scenario("simulate_d4.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn noise_sweep_writes_csv_next_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let o = run(&[
        "noise-sweep",
        "--config",
        scenario("sweep_amplitude_damping_d3.json")
            .to_str()
            .unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    let report = read_report(&out);
    assert_eq!(report.body.noise.unwrap().points.len(), 11);
}

#[test]
fn seeds_give_identical_bodies_and_override_works() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    std::fs::write(
        &cfg,
        r#"{"name": "s", "d": 3, "initial_state": {"kind": "ghz"}, "simulation": {"shots": 5000, "repetitions": 8}, "seed": 1}"#,
    )
    .unwrap();
    let body = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(o.status.code(), Some(0));
        read_report(&out).body.to_json()
    };
    let a = body("11", "a.json");
    let b = body("11", "b.json");
    let other = body("12", "c.json");
    assert_eq!(a, b);
    assert_ne!(a, other);
    assert!(a.contains("\"seed\": 11"));
}

#[test]
fn tol_override_is_echoed() {
    let o = run(&[
        "analyze",
        "--config",
        scenario("weighted_1_2.json").to_str().unwrap(),
        "--tol",
        "1e-6",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: Report = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report.body.scenario.tolerances.privacy, 1e-6);
    assert!(report
        .body
        .verdicts
        .iter()
        .all(|v| v.verdict.tolerance == 1e-6));
}

#[test]
fn bundled_scenarios_parse() {
    for entry in std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")).unwrap()
    {
        let path = entry.unwrap().path();
        qnet_privacy::cli::load_scenario(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
