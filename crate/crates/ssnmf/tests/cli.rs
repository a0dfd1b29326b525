use std::path::Path;
use std::process::Command;

use clap::Parser;
use ssnmf::cli::{run, Cli};
use ssnmf::experiment::separable_corpus;
use ssnmf::format::{format_corpus, read_matrix, read_nonneg, write_matrix, Meta};

fn ssnmf(args: &[&str]) -> String {
    let cli = Cli::try_parse_from(std::iter::once("ssnmf").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    run(cli, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

fn ssnmf_err(args: &[&str]) -> String {
    let cli = Cli::try_parse_from(std::iter::once("ssnmf").chain(args.iter().copied())).unwrap();
    format!("{:#}", run(cli, &mut Vec::new()).unwrap_err())
}

fn write_corpus(dir: &Path) -> String {
    let path = dir.join("corpus.tsv");
    std::fs::write(&path, format_corpus(&separable_corpus(3, 120, 4))).unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn corpus_train_eval_topics() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(tmp.path());
    let model = tmp.path().join("model");
    let printed =
        ssnmf(&["train", "--corpus", &corpus, "--loss", "df", "--rank", "3", "--iters", "50", "--out", s(&model)]);
    assert!(printed.contains("final_objective="));
    for f in ["A.csv", "B.csv", "S.csv", "meta", "report.txt", "trace.csv", "vocab.txt", "classes.txt"] {
        assert!(model.join(f).exists(), "{f}");
    }
    let meta = Meta::read(&model.join("meta")).unwrap();
    for key in ["loss", "rank", "lam", "iters_run", "stop_reason", "seed", "tol", "eps"] {
        assert!(meta.get(key).is_some(), "{key}");
    }
    assert_eq!(meta.get("loss"), Some("df"));

    let summary = ssnmf(&["eval", "--model", s(&model), "--corpus", &corpus]);
    let acc: f64 = Meta::parse(&summary).unwrap().get("accuracy").unwrap().parse().unwrap();
    assert!(acc >= 0.9, "{summary}");
    assert!(model.join("predictions.csv").exists());

    let table = ssnmf(&["topics", "--model", s(&model)]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "topic_1\ttopic_2\ttopic_3");
    let b = read_matrix(&model.join("B_normalized.csv")).unwrap();
    for j in 0..b.cols() {
        let sum: f64 = b.column(j).iter().sum();
        assert!(sum == 0.0 || (sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_lambda_disables_supervision() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(tmp.path());
    let model = tmp.path().join("nmf");
    let printed = ssnmf(&[
        "train",
        "--corpus",
        &corpus,
        "--loss",
        "ff",
        "--rank",
        "3",
        "--lam",
        "0",
        "--iters",
        "5",
        "--out",
        s(&model),
    ]);
    assert!(printed.contains("supervision_error=disabled"), "{printed}");
}

#[test]
fn trials_are_aggregated_as_mean_sd() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(tmp.path());
    let run_dir = tmp.path().join("runs");
    ssnmf(&[
        "train",
        "--corpus",
        &corpus,
        "--loss",
        "dd",
        "--rank",
        "3",
        "--iters",
        "20",
        "--trials",
        "3",
        "--seed",
        "5",
        "--out",
        s(&run_dir),
    ]);
    for t in 0..3 {
        let meta = Meta::read(&run_dir.join(format!("trial_{t:02}/meta"))).unwrap();
        assert_eq!(meta.get("seed"), Some((5 + t).to_string().as_str()));
    }
    let summary = Meta::parse(&ssnmf(&["eval", "--model", s(&run_dir), "--corpus", &corpus])).unwrap();
    assert_eq!(summary.get("trials"), Some("3"));
    assert!(summary.get("accuracy_trial_02").is_some());
    let formatted = summary.get("accuracy_percent").unwrap();
    let (mean, rest) = formatted.split_once(" (").unwrap();
    assert_eq!(mean.split_once('.').unwrap().1.len(), 2, "{formatted}");
    assert!(rest.ends_with(')'));
}

#[test]
fn grid_search_picks_a_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(tmp.path());
    let model = tmp.path().join("grid");
    let printed = ssnmf(&[
        "train",
        "--corpus",
        &corpus,
        "--loss",
        "df",
        "--rank",
        "3",
        "--iters",
        "20",
        "--grid-tol",
        "1e-4,1e-3",
        "--grid-lam",
        "0.1,1",
        "--out",
        s(&model),
    ]);
    assert!(printed.starts_with("grid: tol="), "{printed}");
    let grid = Meta::read(&model.join("grid.txt")).unwrap();
    assert_eq!(grid.entries().len(), 6);
}

#[test]
fn matrix_inputs_and_multi_mode_match_library() {
    use ssnmf_core::classify::{best_threshold_score, predict_scores, LabelMatrix};
    use ssnmf_core::synth::{generate, NoiseModel};

    let tmp = tempfile::tempdir().unwrap();
    let inst = generate(&NoiseModel::from_code("gg", 0.01, 0.01, 2).unwrap(), 12, 3, 20, 3).unwrap();
    let truth = ssnmf_core::Matrix::from_fn(3, 20, |i, j| if (i + j) % 3 == 0 || i == j % 2 { 1.0 } else { 0.0 });
    let (xp, yp) = (tmp.path().join("X.csv"), tmp.path().join("Y.csv"));
    write_matrix(&xp, &inst.x).unwrap();
    write_matrix(&yp, &truth).unwrap();
    let model = tmp.path().join("m");
    ssnmf(&["train", "--x", s(&xp), "--y", s(&yp), "--loss", "fd", "--rank", "2", "--iters", "30", "--out", s(&model)]);
    let summary = Meta::parse(&ssnmf(&[
        "eval",
        "--model",
        s(&model),
        "--x",
        s(&xp),
        "--y",
        s(&yp),
        "--mode",
        "multi",
        "--alpha-grid",
        "101",
    ]))
    .unwrap();

    let fitted = ssnmf::store::load_model(&model).unwrap();
    let ones = ssnmf_core::Mask::ones(12, 20);
    let scores = predict_scores(&fitted, &inst.x, &ones).unwrap();
    let (alpha, f1) = best_threshold_score(&scores, &LabelMatrix::inferred(truth).unwrap().into_multi(), 101).unwrap();
    assert_eq!(summary.get("alpha_star").unwrap().parse::<f64>().unwrap(), alpha);
    assert_eq!(summary.get("micro_f1").unwrap().parse::<f64>().unwrap(), f1);
    assert_eq!(read_nonneg(&model.join("predictions.csv")).unwrap().shape(), (3, 20));
}

#[test]
fn rank_mismatch_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let inst =
        ssnmf_core::synth::generate(&ssnmf_core::synth::NoiseModel::from_code("pp", 0.1, 0.1, 2).unwrap(), 6, 2, 8, 0)
            .unwrap();
    let (xp, yp, xb) = (tmp.path().join("X.csv"), tmp.path().join("Y.csv"), tmp.path().join("Xbad.csv"));
    write_matrix(&xp, &inst.x).unwrap();
    write_matrix(&yp, &inst.y).unwrap();
    write_matrix(&xb, &ssnmf_core::Matrix::filled(5, 8, 1.0)).unwrap();
    let model = tmp.path().join("m");
    ssnmf(&["train", "--x", s(&xp), "--y", s(&yp), "--loss", "dd", "--rank", "2", "--iters", "5", "--out", s(&model)]);
    let y_single = tmp.path().join("Ys.csv");
    write_matrix(&y_single, &ssnmf_core::Matrix::from_fn(2, 8, |i, j| if i == j % 2 { 1.0 } else { 0.0 })).unwrap();
    let err = ssnmf_err(&["eval", "--model", s(&model), "--x", s(&xb), "--y", s(&y_single)]);
    assert!(err.contains("rows"), "{err}");
}

#[test]
fn synth_table_and_lambda_column() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("synth");
    let printed = ssnmf(&[
        "synth",
        "--noise",
        "gg",
        "--sigma1",
        "0.1",
        "--sigma2",
        "0.1",
        "--rank",
        "2",
        "--dims",
        "8,3,10",
        "--seeds",
        "1",
        "--iters",
        "20",
        "--restarts",
        "1",
        "--out",
        s(&out_dir),
    ]);
    let rows: Vec<&str> = printed.lines().skip(1).take_while(|l| !l.starts_with("median_")).collect();
    assert_eq!(rows.len(), 4);
    let ff: Vec<&str> = rows.iter().find(|r| r.split('\t').nth(1) == Some("ff")).unwrap().split('\t').collect();
    assert_eq!(ff[2], "1");
    assert!(printed.contains("best_median="));
    assert!(out_dir.join("instance_0/Astar.csv").exists());
    assert!(out_dir.join("table.tsv").exists());
}

#[test]
fn binary_reports_line_numbers_and_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let xp = tmp.path().join("X.csv");
    std::fs::write(&xp, "2,2\n1,2\n3,oops\n").unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_ssnmf"))
        .args(["train", "--x", s(&xp), "--y", s(&xp), "--loss", "ff", "--out", s(&tmp.path().join("m"))])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("X.csv:3:"), "{stderr}");

    let bad = Command::new(env!("CARGO_BIN_EXE_ssnmf")).args(["synth", "--noise", "gx"]).output().unwrap();
    assert!(!bad.status.success());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ssnmf(&[
            "train",
            "--corpus",
            &corpus,
            "--loss",
            "fd",
            "--rank",
            "3",
            "--iters",
            "15",
            "--labeled-frac",
            "0.5",
            "--out",
            s(dir),
        ]);
        ssnmf(&["eval", "--model", s(dir), "--corpus", &corpus]);
    }
    for f in ["A.csv", "B.csv", "S.csv", "meta", "report.txt", "trace.csv", "predictions.csv", "eval.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
