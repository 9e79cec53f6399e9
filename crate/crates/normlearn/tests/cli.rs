//! End-to-end tests of the `normlearn` binary: flags, formats, exit
//! codes and the persistence contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use normlearn::learner::predict;
use normlearn::model_io::load_model_file;
use normlearn::sparse::Example;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_normlearn")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn write_sample_svm(path: &Path) {
    let lines: Vec<String> = (0..50)
        .map(|i| {
            let x1 = 0.5 + (i % 7) as f64 * 0.2;
            let x2 = 1.0 - (i % 5) as f64 * 0.3;
            let y = 0.7 * x1 - 0.2 * x2;
            let mut parts = vec![format!("{y}")];
            parts.push(format!("1:{x1}"));
            if x2 != 0.0 {
                parts.push(format!("2:{x2}"));
            }
            parts.join(" ")
        })
        .collect();
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn train_reports_progressive_loss() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    write_sample_svm(&data);
    let out = run(&[
        "train", "--data", data.to_str().unwrap(), "--algo", "nag", "--eta", "0.5",
        "--loss", "squared",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("progressive_loss"), "missing loss line:\n{text}");
    assert!(text.contains("examples 50"));
    assert!(text.contains("normalized_loss"));
}

#[test]
fn missing_file_exits_2() {
    let out = run(&["train", "--data", "/nonexistent/nope.svm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn bad_flags_exit_2() {
    let out = run(&["train", "--algo", "warp-drive", "--synthetic", "range-band"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn save_then_test_only_reproduces_final_model_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.svm");
    let model = dir.path().join("m.model");
    let preds = dir.path().join("p.txt");
    write_sample_svm(&data);

    let out = run(&[
        "train", "--data", data.to_str().unwrap(), "--algo", "snag", "--eta", "0.3",
        "--save", model.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&[
        "train", "--data", data.to_str().unwrap(), "--load", model.to_str().unwrap(),
        "--test-only", "--predictions", preds.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // the written predictions must equal in-process predictions of the
    // loaded model to <= 1e-15 relative (they are the same floats)
    let (state, config) = load_model_file(&model).unwrap();
    let examples: Vec<Example> = normlearn::data::SvmlightReader::open(
        &data,
        normlearn::data::LabelMapping::Identity,
    )
    .unwrap()
    .map(|r| r.unwrap())
    .collect();
    let written: Vec<f64> = fs::read_to_string(&preds)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(written.len(), examples.len());
    for (e, &got) in examples.iter().zip(&written) {
        let expect = predict(&state, &config, e).clipped;
        let tol = 1e-15 * expect.abs().max(got.abs());
        assert!((expect - got).abs() <= tol, "prediction drifted: {expect} vs {got}");
    }

    // a second test-only run is byte-identical
    let preds2 = dir.path().join("p2.txt");
    let out = run(&[
        "train", "--data", data.to_str().unwrap(), "--load", model.to_str().unwrap(),
        "--test-only", "--predictions", preds2.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(&preds).unwrap(), fs::read(&preds2).unwrap());
}

#[test]
fn sweep_emits_expected_rows_with_starred_best() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep", "--synthetic", "range-band", "--t", "100", "--d", "3", "--seed", "5",
        "--algos", "nag,sgd", "--eta-min", "0.01", "--eta-max", "1", "--points-per-decade",
        "2", "--out", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.trim().lines().collect();
    // grid 0.01 -> 1 at 2 points/decade = 5 etas, 2 algos + header
    assert_eq!(rows.len(), 1 + 2 * 5, "rows:\n{text}");
    assert_eq!(rows[0], "algorithm,eta,progressive_loss,best");
    let stars = rows.iter().filter(|r| r.ends_with(",*")).count();
    assert_eq!(stars, 2, "exactly one starred row per algorithm:\n{text}");
}

#[test]
fn sweep_single_cell_matches_full_sweep_value() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.csv");
    let single = dir.path().join("single.csv");
    let common = [
        "--synthetic", "range-band", "--t", "120", "--d", "3", "--seed", "9", "--algos",
        "nag",
    ];
    let out = run(
        &[&["sweep"], &common[..], &["--eta-min", "0.01", "--eta-max", "1",
            "--points-per-decade", "1", "--out", full.to_str().unwrap()]]
            .concat(),
    );
    assert!(out.status.success());
    let out = run(
        &[&["sweep"], &common[..], &["--eta-min", "0.1", "--eta-max", "0.1",
            "--points-per-decade", "1", "--out", single.to_str().unwrap()]]
            .concat(),
    );
    assert!(out.status.success());
    let full_text = fs::read_to_string(&full).unwrap();
    let single_row = fs::read_to_string(&single)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .trim_end_matches(['*', ','])
        .to_string();
    assert!(
        full_text.lines().any(|l| l.starts_with(&single_row)),
        "single cell row `{single_row}` not found in full sweep:\n{full_text}"
    );
}

#[test]
fn generate_output_parses_back() {
    let out = run(&[
        "generate", "--kind", "scaled-two-feature", "--t", "20", "--scale", "100",
        "--seed", "3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let examples: Vec<Example> = normlearn::data::SvmlightReader::new(
        text.as_bytes(),
        normlearn::data::LabelMapping::Identity,
    )
    .map(|r| r.unwrap())
    .collect();
    assert_eq!(examples.len(), 20);
    assert!(examples.iter().all(|e| e.features.len() == 2));
}

#[test]
fn stats_reports_scale_range() {
    let out = run(&[
        "stats", "--synthetic", "scaled-two-feature", "--t", "50", "--scale", "1000",
        "--seed", "2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("examples 50"));
    assert!(text.contains("scale_range ["), "missing scale range:\n{text}");
}

#[test]
fn csv_training_with_categoricals() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    fs::write(&path, "label,age,color\n1,0.5,red\n0,1.5,blue\n1,2.5,red\n").unwrap();
    let out = run(&[
        "train", "--data", path.to_str().unwrap(), "--format", "csv", "--label-col",
        "label", "--label-map", "zero-one", "--loss", "logistic", "--algo", "nag",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("examples 3"));
}

#[test]
fn verify_scoped_run_passes() {
    let out = run(&["verify", "--only", "lemma4", "--n", "200", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("== check lemma4"));
    assert!(text.contains("summary checks=1 failed=0"));
}

#[test]
fn verify_trace_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("t.svm");
    let trace = dir.path().join("t.trace");
    write_sample_svm(&data);
    let out = run(&[
        "train", "--data", data.to_str().unwrap(), "--algo", "adagrad", "--eta", "0.2",
        "--trace", trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let out = run(&["verify", "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("lemma1 linearized"));

    let mut corrupted = fs::read_to_string(&trace).unwrap();
    corrupted = corrupted.replace("|a", "|zzz");
    fs::write(&trace, corrupted).unwrap();
    let out = run(&["verify", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_trace_violating_the_bound_exits_1() {
    // a trace whose weights do NOT follow w_{t+1} = w_t - A^{-1} g
    // breaks the decomposition: round 2 carries a huge planted weight
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.trace");
    let text = "normlearn-trace v1\nrounds 2\n\
        1 0 0 0 -1 |x 0:1.0e0 |g 0:-1.0e0 |a 0:1.0e0 |w\n\
        2 0 1.0e1 0 1 |x 0:1.0e0 |g 0:1.0e0 |a 0:1.0e0 |w 0:1.0e1\n";
    fs::write(&trace, text).unwrap();
    let out = run(&["verify", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("holds=false"));
}

#[test]
fn sweep_zero_one_metric_adds_interval_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cls.svm");
    let lines: Vec<String> = (0..40)
        .map(|i| {
            let x = if i % 2 == 0 { 1.0 } else { -1.0 };
            let y = if x > 0.0 { 1 } else { -1 };
            format!("{y} 1:{x} 2:{}", 0.5 + (i % 3) as f64)
        })
        .collect();
    fs::write(&data, lines.join("\n") + "\n").unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep", "--data", data.to_str().unwrap(), "--loss", "hinge", "--algos", "nag",
        "--eta-min", "0.1", "--eta-max", "1", "--points-per-decade", "1",
        "--metric-zero-one", "--out", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(
        text.starts_with("algorithm,eta,progressive_loss,zero_one_loss,ci_lo,ci_hi,best"),
        "{text}"
    );
    // interval brackets the estimate on every row
    for row in text.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        let m: f64 = cols[3].parse().unwrap();
        let lo: f64 = cols[4].parse().unwrap();
        let hi: f64 = cols[5].parse().unwrap();
        assert!(lo <= m && m <= hi, "{row}");
    }
}

#[test]
fn train_prenormalized_maxnorm_has_unit_scales() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("t.svm");
    write_sample_svm(&data);
    // stats on the pre-normalized view reports scale range [1, 1]
    let out = run(&[
        "stats", "--data", data.to_str().unwrap(), "--prenormalize", "maxnorm",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("scale_range [1, 1]"), "{text}");
}
