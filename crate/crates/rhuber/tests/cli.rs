use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rhuber::cli::{EstimateJson, RobustMeanJson};
use rhuber::io::{load_csv, load_json, sidecar_path, OracleSidecar};
use rhuber_core::ConditionReport;

const GOLDEN_BETA: [f64; 3] = [0.44597712160861674, 0.5155403109124833, 0.47754465243895267];

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rhuber"));
    // keep a CI environment from leaking into flag defaults
    for (key, _) in std::env::vars() {
        if key.starts_with("RH_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn rhuber")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_200x3.csv")
}

fn generate(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("data.csv");
    let mut args = vec![
        "generate",
        "--n",
        "300",
        "--d",
        "3",
        "--seed",
        "11",
        "--out",
        s(&out),
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn golden_estimate_is_frozen() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est.json");
    let o = run(&[
        "estimate",
        "--input",
        s(&golden()),
        "--eps",
        "0.1",
        "--seed",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let est: EstimateJson = load_json(&out).unwrap();
    assert!(est.converged && est.certificate.pass);
    for (a, b) in est.beta_hat.iter().zip(GOLDEN_BETA) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn generate_writes_a_replayable_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate(dir.path(), &["--eps", "0.1", "--attack", "point-cluster"]);
    let sidecar: OracleSidecar = load_json(&sidecar_path(&csv)).unwrap();
    assert_eq!(sidecar.outlier_idx.len(), 30);
    let ds = load_csv(&csv).unwrap();
    assert_eq!(sidecar.replay().unwrap().dataset, ds);
    let norm: f64 = sidecar.beta_star.iter().map(|b| b * b).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate(dir.path(), &["--eps", "0.05", "--attack", "leverage"]);
    let first = run(&[
        "estimate",
        "--input",
        s(&csv),
        "--eps",
        "0.05",
        "--seed",
        "3",
    ]);
    let again = run(&[
        "estimate",
        "--input",
        s(&csv),
        "--eps",
        "0.05",
        "--seed",
        "3",
    ]);
    assert!(first.status.success());
    assert_eq!(first.stdout, again.stdout);

    let other = dir.path().join("other.csv");
    run(&[
        "generate",
        "--n",
        "300",
        "--d",
        "3",
        "--seed",
        "11",
        "--eps",
        "0.05",
        "--attack",
        "leverage",
        "--out",
        s(&other),
    ]);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&other).unwrap());
}

#[test]
fn env_vars_stand_in_for_flags() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate(dir.path(), &[]);
    let by_flag = run(&[
        "estimate",
        "--input",
        s(&csv),
        "--eps",
        "0.05",
        "--solver",
        "lbfgs",
    ]);
    let by_env = bin()
        .args(["estimate", "--input", s(&csv)])
        .env("RH_EPS", "0.05")
        .env("RH_SOLVER", "lbfgs")
        .output()
        .unwrap();
    assert!(
        by_env.status.success(),
        "{}",
        String::from_utf8_lossy(&by_env.stderr)
    );
    assert_eq!(by_flag.stdout, by_env.stdout);
}

#[test]
fn input_and_config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["estimate", "--input", s(&empty), "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty input"));

    let o = run(&["estimate", "--input", s(&golden()), "--eps", "0.34"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "estimate",
        "--input",
        s(&golden()),
        "--eps",
        "0.3333333333333333",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,x1\n1,2\n3,abc\n").unwrap();
    let o = run(&["robust-mean", "--input", s(&bad), "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3, column 2"));

    let o = run(&["estimate", "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "estimate",
        "--input",
        s(&dir.path().join("missing.csv")),
        "--eps",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_config_keys_are_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fit.toml");
    std::fs::write(&cfg, "[huber]\ngrad_tol = 1e-8\nmax_iters = 10\n").unwrap();
    let o = run(&[
        "estimate",
        "--input",
        s(&golden()),
        "--eps",
        "0.1",
        "--config",
        s(&cfg),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("max_iters") && err.contains("line 3"), "{err}");

    std::fs::write(&cfg, "mode = \"bounded_cov\"\n[robust]\nc_term = 12.0\n[huber]\nsolver = \"lbfgs_like_quasi_newton\"\n").unwrap();
    let o = run(&[
        "estimate",
        "--input",
        s(&golden()),
        "--eps",
        "0.1",
        "--config",
        s(&cfg),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn exhausted_budget_exits_with_two() {
    let o = run(&[
        "estimate",
        "--input",
        s(&golden()),
        "--eps",
        "0.1",
        "--max-iter",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let est: EstimateJson = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!est.converged);
}

#[test]
fn robust_mean_on_clean_data_tracks_the_sample_mean() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate(dir.path(), &[]);
    let o = run(&["robust-mean", "--input", s(&csv), "--eps", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let rm: RobustMeanJson = serde_json::from_slice(&o.stdout).unwrap();
    let ds = load_csv(&csv).unwrap();
    let mean = ds.sample_mean();
    let gap: f64 = rm
        .mu_w
        .iter()
        .zip(&mean)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    // both estimate the zero mean to O(√(d/n)); they should be far closer
    assert!(gap < 0.05, "gap {gap}");
    assert!((rm.w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn certify_at_beta_star_reports_zero_sums() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate(dir.path(), &["--eps", "0.1", "--attack", "leverage"]);
    let o = run(&["certify", "--input", s(&csv), "--at-beta-star"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: ConditionReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report.points.len(), 10);
    for p in &report.points {
        assert_eq!(
            (p.delta_norm, p.lhs1, p.lhs2, p.lhs3, p.lhs4),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }
}

#[test]
fn certify_reads_an_estimate_and_checks_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate(dir.path(), &["--eps", "0.1", "--attack", "leverage"]);
    let est = dir.path().join("est.json");
    assert!(run(&[
        "estimate",
        "--input",
        s(&csv),
        "--eps",
        "0.1",
        "--out",
        s(&est)
    ])
    .status
    .success());
    let o = run(&[
        "certify",
        "--input",
        s(&csv),
        "--estimate",
        s(&est),
        "--eta-grid",
        "0.5,1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: ConditionReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report.eta_grid, vec![0.5, 1.0]);
    assert!(report.points[1].lhs4 > 0.0);

    // a dataset that no longer matches its sidecar is refused
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let rest = lines[1].split_once(',').unwrap().1.to_string();
    lines[1] = format!("0.5,{rest}");
    std::fs::write(&csv, lines.join("\n")).unwrap();
    let o = run(&["certify", "--input", s(&csv), "--estimate", s(&est)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not match"));

    let o = run(&["certify", "--input", s(&golden())]);
    assert_eq!(o.status.code(), Some(1), "golden has no sidecar");
}

#[test]
fn sweep_on_one_cell_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        r#"
estimators = ["two_step"]
seeds = [5]
sizes = [{ n = 200, d = 3 }]

[generator]
design = { kind = "gaussian_identity" }
noise = { kind = "gaussian", sigma = 1.0 }

[[contamination]]
eps = 0.1
attack = { kind = "leverage", scale = 5.0, response_flip = -1.0 }
"#,
    )
    .unwrap();
    let records = dir.path().join("records.csv");
    let summary = dir.path().join("summary.json");
    let o = run(&[
        "sweep",
        "--config",
        s(&cfg),
        "--records",
        s(&records),
        "--summary",
        s(&summary),
        "--workers",
        "2",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(&records).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert_eq!(lines[0], "# schema_version: 1");
    assert_eq!(lines[1], rhuber::harness::RECORD_HEADER);
    assert!(lines[2].starts_with("0.1,200,3,leverage,two_step,5,"));
    let sum: serde_json::Value = load_json(&summary).unwrap();
    assert_eq!(sum["schema_version"], 1);
    assert_eq!(sum["rows"].as_array().unwrap().len(), 1);

    std::fs::write(
        &cfg,
        "estimators = [\"ols\"]\nseeds = [1]\nsizes = [{ n = 20, d = 2 }]\nworkers = 3\n",
    )
    .unwrap();
    let o = run(&["sweep", "--config", s(&cfg), "--records", s(&records)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("workers"));
}
