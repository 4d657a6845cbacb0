use std::path::Path;
use std::process::{Command, Output};

use mgspline_cli::data::read_table;

fn mgspline(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgspline"))
        .args(args)
        .current_dir(cwd)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn malformed_input_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x1,x2,y\n0.1,0.2,1.0\n0.3,0.4,0.5\n0.5,oops,0.1\n").unwrap();
    let out = mgspline(&["fit", "--input", "bad.csv", "--levels", "2", "--output", "o"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let msg = stderr(&out);
    assert!(msg.contains("bad.csv:4"), "{msg}");
    assert!(msg.contains("oops"), "{msg}");

    std::fs::write(dir.path().join("ragged.csv"), "0.1,0.2,1.0\n0.3,0.4\n").unwrap();
    let out = mgspline(&["fit", "--input", "ragged.csv", "--levels", "2", "--output", "o"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("ragged.csv:2"), "{}", stderr(&out));
}

#[test]
fn usage_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = mgspline(&["fit", "--input", "nope.csv", "--output", "o"], dir.path());
    assert_eq!(missing.status.code(), Some(3));
    let bad_lambda = mgspline(&["fit", "--lambda", "-1", "--output", "o"], dir.path());
    assert_eq!(bad_lambda.status.code(), Some(2));
    let too_big = mgspline(&["analyze", "--levels", "5", "--dense-cap", "100", "--n", "500"], dir.path());
    assert_eq!(too_big.status.code(), Some(5), "{}", stderr(&too_big));
}

#[test]
fn non_convergence_writes_outputs_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgspline(
        &["fit", "--levels", "4", "--n", "3000", "--precond", "none", "--max-iter", "3", "--output", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(7), "{}", stderr(&out));
    let report = json(&dir.path().join("o/report.json"));
    assert_eq!(report["converged"], false);
    assert_eq!(report["iterations"], 3);
    assert!(dir.path().join("o/coefficients.txt").exists());
}

#[test]
fn predict_reproduces_training_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = mgspline(&["generate", "--dim", "2", "--n", "3000", "--seed", "5", "--output", "train.csv"], d);
    assert!(gen.status.success(), "{}", stderr(&gen));
    let fit = mgspline(&["fit", "--input", "train.csv", "--levels", "4", "--output", "o"], d);
    assert!(fit.status.success(), "{}", stderr(&fit));
    let pred = mgspline(&["predict", "--model", "o/model.json", "--input", "train.csv", "--output", "p.csv"], d);
    assert!(pred.status.success(), "{}", stderr(&pred));

    let (_, residuals) = read_table(&d.join("o/residuals.csv")).unwrap();
    let (_, predicted) = read_table(&d.join("p.csv")).unwrap();
    assert_eq!(residuals.len(), 3000);
    assert_eq!(predicted.len(), 3000);
    for ((_, r), (_, p)) in residuals.iter().zip(&predicted) {
        assert_eq!(&r[..2], &p[..2]);
        let (y, fitted, resid) = (r[2], r[3], r[4]);
        assert!((fitted - p[2]).abs() <= 1e-12, "{fitted} vs {}", p[2]);
        assert!((y - p[2] - resid).abs() <= 1e-12);
    }
}

#[test]
fn scaled_domain_accepts_raw_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut text = String::from("a;b;response\n");
    for i in 0..400 {
        let (u, v) = ((i % 20) as f64 / 19.0, (i / 20) as f64 / 19.0);
        text.push_str(&format!("{};{};{}\n", 10.0 + 90.0 * u, -5.0 + v, 2.0 * u - v));
    }
    std::fs::write(d.join("raw.csv"), text).unwrap();
    let fit = mgspline(&["fit", "--input", "raw.csv", "--levels", "2", "--lambda", "1e-6", "--output", "o"], d);
    assert!(fit.status.success(), "{}", stderr(&fit));
    let model = json(&d.join("o/model.json"));
    assert_eq!(model["scaling"][0]["lower"], 10.0);
    assert_eq!(model["scaling"][1]["upper"], -4.0);

    std::fs::write(d.join("q.csv"), "55,-4.5\n").unwrap();
    let pred = mgspline(&["predict", "--model", "o/model.json", "--input", "q.csv", "--output", "p.csv"], d);
    assert!(pred.status.success(), "{}", stderr(&pred));
    let (_, rows) = read_table(&d.join("p.csv")).unwrap();
    assert!((rows[0].1[2] - 0.5).abs() < 1e-4, "{}", rows[0].1[2]);

    std::fs::write(d.join("far.csv"), "500,-4.5\n").unwrap();
    let far = mgspline(&["predict", "--model", "o/model.json", "--input", "far.csv", "--output", "p.csv"], d);
    assert_eq!(far.status.code(), Some(4));
    assert!(stderr(&far).contains("far.csv:1"));
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |o: &'static str| ["fit", "--levels", "4", "--n", "5000", "--seed", "11", "--deterministic", "--output", o];
    assert!(mgspline(&args("a"), d).status.success());
    assert!(mgspline(&args("b"), d).status.success());
    let a = std::fs::read(d.join("a/coefficients.txt")).unwrap();
    let b = std::fs::read(d.join("b/coefficients.txt")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let other = ["fit", "--levels", "4", "--n", "5000", "--seed", "12", "--deterministic", "--output", "c"];
    assert!(mgspline(&other, d).status.success());
    assert_ne!(a, std::fs::read(d.join("c/coefficients.txt")).unwrap());
}

#[test]
fn environment_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let run = |levels_flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mgspline"));
        cmd.current_dir(dir.path()).env_clear().env("MGSPLINE_LEVELS", "2").env("MGSPLINE_N", "500");
        cmd.args(["fit", "--output", "o"]);
        if let Some(l) = levels_flag {
            cmd.args(["--levels", l]);
        }
        assert!(cmd.output().unwrap().status.success());
        json(&dir.path().join("o/report.json"))
    };
    let from_env = run(None);
    assert_eq!(from_env["levels"], 2);
    assert_eq!(from_env["observations"], 500);
    assert_eq!(run(Some("3"))["levels"], 3);
}

#[test]
fn converged_report_at_level_five() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgspline(&["fit", "--dim", "2", "--levels", "5", "--n", "100000", "--output", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&dir.path().join("o/report.json"));
    assert_eq!(report["converged"], true);
    assert_eq!(report["preconditioner"], "mg-jacobi");
    let iterations = report["iterations"].as_u64().unwrap();
    assert!(iterations <= 15, "{iterations}");
    let k = report["level_dimensions"][4].as_u64().unwrap();
    assert_eq!(k, 35 * 35);
    assert!(report["memory"]["auxiliary_reals"].as_u64().unwrap() < 10 * k);
    assert!(report["relative_residual"].as_f64().unwrap() <= 1e-8);

    let (_, grid) = read_table(&dir.path().join("o/grid.csv")).unwrap();
    assert_eq!(grid.len(), 101 * 101);
    let lines = std::fs::read_to_string(dir.path().join("o/coefficients.txt")).unwrap();
    assert_eq!(lines.lines().count() as u64, k);
}

#[test]
fn bench_emits_iteration_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgspline(
        &["bench", "--levels", "2-4", "--n", "4000", "--precond", "none", "--precond", "mg-jacobi", "--output", "t.tsv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[0].starts_with("dim\tlevel\tunknowns"));
    let table = std::fs::read_to_string(dir.path().join("t.tsv")).unwrap();
    assert_eq!(table, stdout);
    for pair in lines[1..].chunks(2) {
        let cg: usize = pair[0].split('\t').nth(5).unwrap().parse().unwrap();
        let mg: usize = pair[1].split('\t').nth(5).unwrap().parse().unwrap();
        assert!(pair[1].contains("mg-jacobi"));
        assert!(mg < cg, "{mg} vs {cg}");
    }
}

#[test]
fn analyze_writes_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgspline(&["analyze", "--levels", "3", "--n", "2000", "--output", "a"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = json(&dir.path().join("a/analysis.json"));
    let conds: Vec<f64> = (0..3).map(|i| summary[i]["condition_number"].as_f64().unwrap()).collect();
    assert!(conds[0] > 20.0 * conds[1]);
    assert!(conds[2] <= conds[1]);
    let spectra = std::fs::read_to_string(dir.path().join("a/spectra.csv")).unwrap();
    assert_eq!(spectra.lines().count(), 1 + 3 * 121);
}
