//! The `ssnmf` command line: `train`, `eval`, `topics` and `synth`.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ssnmf_core::classify::{
    accuracy, best_threshold_score, grid_search, micro_f1, predict_scores, predict_single, threshold_predict, GridSpec,
    LabelMatrix, LabelMode,
};
use ssnmf_core::text::{build_vocab, encode_labels, make_masks, tfidf, top_keywords, Corpus, Split, Vocabulary};
use ssnmf_core::{col_normalize, fit, LossPair, Mask, Matrix, NonnegMatrix, Observations, SsnmfConfig, DEFAULT_EPS};

use crate::experiment::{format_mean_sd, mean_sd, run_synth, SynthSpec};
use crate::format::{
    create_dir, format_lines, read_corpus, read_lines, read_mask, read_matrix, read_nonneg, write_matrix, write_text,
    Meta,
};
use crate::parallel::{ordered_map, worker_count};
use crate::store::{error_terms, format_report, load_model, save_model, save_planted, write_report, META_FILE};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const CLASSES_FILE: &str = "classes.txt";
pub const PIPELINE_FILE: &str = "pipeline";

#[derive(Debug, Parser)]
#[command(name = "ssnmf", version, about = "Semi-supervised nonnegative matrix factorization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a corpus or on X/Y matrices.
    Train(TrainArgs),
    /// Score a trained model (or a directory of trials) on test data.
    Eval(EvalArgs),
    /// Top keywords per topic and the column-normalized label factor.
    Topics(TopicsArgs),
    /// Noise-model experiment over planted instances.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub loss: LossPair,
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lam: f64,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of training documents whose labels are visible.
    #[arg(long, default_value_t = 1.0)]
    pub labeled_frac: f64,
    /// Tab-separated corpus; the train split is fitted, val feeds the grid search.
    #[arg(long, conflicts_with_all = ["x", "y"])]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub min_df: usize,
    #[arg(long)]
    pub max_terms: Option<usize>,
    #[arg(long, requires = "y")]
    pub x: Option<PathBuf>,
    #[arg(long, requires = "x")]
    pub y: Option<PathBuf>,
    /// Data mask; all ones when omitted.
    #[arg(long, requires = "x")]
    pub w: Option<PathBuf>,
    /// Label mask; drawn from `--labeled-frac` when omitted.
    #[arg(long, requires = "x")]
    pub l: Option<PathBuf>,
    #[arg(long, requires = "y_val")]
    pub x_val: Option<PathBuf>,
    #[arg(long, requires = "x_val")]
    pub y_val: Option<PathBuf>,
    /// Independent fits with seeds seed, seed+1, ...; written to trial_NN.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',', requires = "grid_lam")]
    pub grid_tol: Vec<f64>,
    #[arg(long, value_delimiter = ',', requires = "grid_tol")]
    pub grid_lam: Vec<f64>,
    /// Seeds averaged per grid cell.
    #[arg(long, default_value_t = 1)]
    pub grid_trials: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Single,
    Multi,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model directory, or a directory of trial_NN model directories.
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus the model was trained on; its test split is scored.
    #[arg(long, conflicts_with_all = ["x", "y"])]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "y")]
    pub x: Option<PathBuf>,
    #[arg(long, requires = "x")]
    pub y: Option<PathBuf>,
    #[arg(long, requires = "x")]
    pub w: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalMode::Single)]
    pub mode: EvalMode,
    #[arg(long, default_value_t = 101)]
    pub alpha_grid: usize,
    /// Directory for predictions and the summary; defaults to `--model`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TopicsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Term list, one per line; defaults to the model's vocab.txt.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// Output directory; defaults to `--model`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// gg, gp, pg or pp (data noise then label noise).
    #[arg(long)]
    pub noise: String,
    #[arg(long, default_value_t = 0.1)]
    pub sigma1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 4)]
    pub rank: usize,
    /// n1,k,n2
    #[arg(long, value_delimiter = ',', default_value = "40,5,60")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    /// First instance seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Writes table.tsv, summary.txt and one planted instance per seed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(&args, out),
        Command::Eval(args) => eval(&args, out),
        Command::Topics(args) => topics(&args, out),
        Command::Synth(args) => synth(&args, out),
    }
}

/// Inputs shared by every trial of a training run.
struct TrainData {
    x: NonnegMatrix,
    w: Mask,
    y: NonnegMatrix,
    /// Label pattern used to draw `L`; only its shape matters.
    labels: LabelMatrix,
    l: Option<Mask>,
    val: Option<(NonnegMatrix, LabelMatrix)>,
    vocab: Option<Vocabulary>,
    classes: Option<Vec<String>>,
}

/// Vocabulary, train/validation matrices and classes derived from a corpus.
struct CorpusData {
    vocab: Vocabulary,
    classes: Vec<String>,
    x: NonnegMatrix,
    y: LabelMatrix,
}

fn corpus_data(corpus: &Corpus, min_df: usize, max_terms: Option<usize>) -> Result<CorpusData> {
    let vocab = build_vocab(corpus, min_df, max_terms)?;
    ensure!(!vocab.is_empty(), "vocabulary is empty; lower --min-df");
    let classes = corpus.classes();
    ensure!(!classes.is_empty(), "corpus has no labels");
    let train = corpus.split(Split::Train);
    let x = tfidf(&train, &vocab)?;
    let y = encode_labels(&train, &classes)?;
    Ok(CorpusData { vocab, classes, x, y })
}

fn label_csv(path: &Path) -> Result<LabelMatrix> {
    let m = read_matrix(path)?;
    LabelMatrix::inferred(m).with_context(|| format!("{}: labels must be 0/1", path.display()))
}

fn load_train_data(args: &TrainArgs) -> Result<TrainData> {
    if let Some(path) = &args.corpus {
        let corpus = read_corpus(path)?;
        let data = corpus_data(&corpus, args.min_df, args.max_terms)?;
        let val_docs = corpus.split(Split::Val);
        let val = if val_docs.is_empty() {
            None
        } else {
            Some((tfidf(&val_docs, &data.vocab)?, encode_labels(&val_docs, &data.classes)?))
        };
        return Ok(TrainData {
            w: Mask::ones(data.x.rows(), data.x.cols()),
            y: data.y.to_nonneg(),
            x: data.x,
            labels: data.y,
            l: None,
            val,
            vocab: Some(data.vocab),
            classes: Some(data.classes),
        });
    }
    let (Some(xp), Some(yp)) = (&args.x, &args.y) else {
        bail!("supply --corpus or both --x and --y");
    };
    let x = read_nonneg(xp)?;
    let y = read_nonneg(yp)?;
    let w = match &args.w {
        Some(p) => read_mask(p)?,
        None => Mask::ones(x.rows(), x.cols()),
    };
    let l = args.l.as_deref().map(read_mask).transpose()?;
    let labels = LabelMatrix::new(Matrix::zeros(y.rows(), y.cols()), LabelMode::Multi)?;
    let val = match (&args.x_val, &args.y_val) {
        (Some(xv), Some(yv)) => Some((read_nonneg(xv)?, label_csv(yv)?)),
        _ => None,
    };
    Ok(TrainData { x, w, y, labels, l, val, vocab: None, classes: None })
}

fn trial_dir(root: &Path, trial: usize, trials: usize) -> PathBuf {
    if trials == 1 {
        root.to_path_buf()
    } else {
        root.join(format!("trial_{trial:02}"))
    }
}

fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    ensure!(args.trials >= 1, "--trials must be at least 1");
    let data = load_train_data(args)?;
    let mut base = SsnmfConfig {
        rank: args.rank,
        lambda: args.lam,
        max_iters: args.iters,
        tol: args.tol,
        eps: args.eps,
        seed: args.seed,
    };
    base.validate()?;
    create_dir(&args.out)?;

    if !args.grid_tol.is_empty() {
        let Some((x_val, y_val)) = &data.val else {
            bail!("grid search needs validation data: a val split in --corpus, or --x-val and --y-val");
        };
        let grid = GridSpec::new(args.grid_tol.clone(), args.grid_lam.clone())?;
        let (_, l) = make_masks(&data.x, &data.labels, args.labeled_frac, base.seed)?;
        let l = data.l.clone().unwrap_or(l);
        let obs = Observations::new(&data.x, &data.w, &data.y, &l)?;
        let outcome = grid_search(&obs, x_val, y_val, args.loss, &base, &grid, args.grid_trials)?;
        let mut grid_meta = Meta::new();
        for ((tol, lam), score) in grid.cells().iter().zip(&outcome.cell_scores) {
            grid_meta.push(&format!("cell_tol{tol}_lam{lam}"), score);
        }
        grid_meta.push("selected_tol", outcome.config.tol).push("selected_lam", outcome.config.lambda);
        grid_meta.write(&args.out.join("grid.txt"))?;
        writeln!(out, "grid: tol={} lam={}", outcome.config.tol, outcome.config.lambda)?;
        base = SsnmfConfig { seed: args.seed, ..outcome.config };
    }

    let trials: Vec<usize> = (0..args.trials).collect();
    let fits = ordered_map(&trials, worker_count(), |&t| -> Result<_> {
        let cfg = SsnmfConfig { seed: base.seed.wrapping_add(t as u64), ..base };
        let l = match &data.l {
            Some(l) => l.clone(),
            None => make_masks(&data.x, &data.labels, args.labeled_frac, cfg.seed)?.1,
        };
        let obs = Observations::new(&data.x, &data.w, &data.y, &l)?;
        let (model, report) = fit(&obs, args.loss, &cfg)?;
        let (recon, sup) = error_terms(&model, &data.x, &data.w, &data.y, &l)?;
        Ok((model, report, recon, sup))
    });

    for (t, result) in fits.into_iter().enumerate() {
        let (model, report, recon, sup) = result?;
        let dir = trial_dir(&args.out, t, args.trials);
        save_model(&dir, &model, &report)?;
        write_report(&dir, &report, recon, sup)?;
        if let (Some(vocab), Some(classes)) = (&data.vocab, &data.classes) {
            write_text(&dir.join(VOCAB_FILE), &format_lines(vocab.terms()))?;
            write_text(&dir.join(CLASSES_FILE), &format_lines(classes))?;
            let mut pipeline = Meta::new();
            pipeline.push("min_df", args.min_df);
            if let Some(m) = args.max_terms {
                pipeline.push("max_terms", m);
            }
            pipeline.write(&dir.join(PIPELINE_FILE))?;
        }
        let (summary, _) = format_report(&report, recon, sup);
        if args.trials > 1 {
            writeln!(out, "trial_{t:02}")?;
        }
        out.write_all(summary.as_bytes())?;
    }
    Ok(())
}

/// `dir` itself when it holds a model, else its `trial_*` subdirectories.
pub fn model_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(META_FILE).exists() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir).with_context(|| format!("{}: not a model directory", dir.display()))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("trial_"))
                && p.join(META_FILE).exists()
        })
        .collect();
    dirs.sort();
    ensure!(!dirs.is_empty(), "{}: no model found (expected meta or trial_NN directories)", dir.display());
    Ok(dirs)
}

/// Test inputs rebuilt from the corpus with the model's own vocabulary.
fn corpus_test_data(corpus: &Corpus, model_dir: &Path) -> Result<(NonnegMatrix, LabelMatrix)> {
    let pipeline_path = model_dir.join(PIPELINE_FILE);
    let pipeline = Meta::read(&pipeline_path).context("model was not trained on a corpus")?;
    let min_df: usize = pipeline.value("min_df", &pipeline_path)?;
    let max_terms: Option<usize> =
        pipeline.get("max_terms").map(|_| pipeline.value("max_terms", &pipeline_path)).transpose()?;
    let vocab = build_vocab(corpus, min_df, max_terms)?;
    let saved = read_lines(&model_dir.join(VOCAB_FILE))?;
    ensure!(vocab.terms() == saved.as_slice(), "corpus vocabulary differs from the one the model was trained with");
    let classes = read_lines(&model_dir.join(CLASSES_FILE))?;
    let test = corpus.split(Split::Test);
    ensure!(!test.is_empty(), "corpus has no test documents");
    Ok((tfidf(&test, &vocab)?, encode_labels(&test, &classes)?))
}

fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let dirs = model_dirs(&args.model)?;
    let corpus = args.corpus.as_deref().map(read_corpus).transpose()?;
    let csv_data = match (&args.x, &args.y) {
        (Some(xp), Some(yp)) => {
            let x = read_nonneg(xp)?;
            let w = match &args.w {
                Some(p) => read_mask(p)?,
                None => Mask::ones(x.rows(), x.cols()),
            };
            Some((x, w, label_csv(yp)?))
        }
        _ => None,
    };
    ensure!(corpus.is_some() || csv_data.is_some(), "supply --corpus or both --x and --y");

    let results = ordered_map(&dirs, worker_count(), |dir| -> Result<(f64, f64, LabelMatrix)> {
        let model = load_model(dir)?;
        let (x, w, truth) = match (&corpus, &csv_data) {
            (Some(c), _) => {
                let (x, y) = corpus_test_data(c, dir)?;
                (x.clone(), Mask::ones(x.rows(), x.cols()), y)
            }
            (None, Some((x, w, y))) => (x.clone(), w.clone(), y.clone()),
            (None, None) => unreachable!("checked above"),
        };
        ensure!(
            x.rows() == model.a.rows(),
            "{}: test data has {} rows but the model dictionary has {}",
            dir.display(),
            x.rows(),
            model.a.rows()
        );
        ensure!(truth.classes() == model.b.rows(), "{}: label count differs from the model", dir.display());
        match args.mode {
            EvalMode::Single => {
                ensure!(truth.mode() == LabelMode::Single, "single mode needs exactly one label per document");
                let pred = predict_single(&model, &x, &w)?;
                Ok((accuracy(&truth, &pred)?, micro_f1(&pred, &truth)?, pred))
            }
            EvalMode::Multi => {
                let scores = predict_scores(&model, &x, &w)?;
                let truth = truth.into_multi();
                let (alpha, score) = best_threshold_score(&scores, &truth, args.alpha_grid)?;
                Ok((alpha, score, threshold_predict(&scores, alpha)?))
            }
        }
    });

    let out_dir = args.out.clone().unwrap_or_else(|| args.model.clone());
    create_dir(&out_dir)?;
    let trials = dirs.len();
    let mut firsts = Vec::with_capacity(trials);
    let mut seconds = Vec::with_capacity(trials);
    for (t, r) in results.into_iter().enumerate() {
        let (first, second, pred) = r?;
        let name = if trials == 1 { "predictions.csv".to_string() } else { format!("predictions_trial_{t:02}.csv") };
        write_matrix(&out_dir.join(name), pred.as_matrix())?;
        firsts.push(first);
        seconds.push(second);
    }

    let mut summary = Meta::new();
    let (first_key, second_key) = match args.mode {
        EvalMode::Single => ("accuracy", "micro_f1"),
        EvalMode::Multi => ("alpha_star", "micro_f1"),
    };
    summary.push("mode", if args.mode == EvalMode::Single { "single" } else { "multi" }).push("trials", trials);
    let headline = if args.mode == EvalMode::Single { &firsts } else { &seconds };
    if trials == 1 {
        summary.push(first_key, firsts[0]).push(second_key, seconds[0]);
    } else {
        for t in 0..trials {
            summary
                .push(&format!("{first_key}_trial_{t:02}"), firsts[t])
                .push(&format!("{second_key}_trial_{t:02}"), seconds[t]);
        }
        let (mean, sd) = mean_sd(headline);
        let key = if args.mode == EvalMode::Single { "accuracy" } else { "micro_f1" };
        summary.push(&format!("{key}_mean"), mean).push(&format!("{key}_sd"), sd);
    }
    let key = if args.mode == EvalMode::Single { "accuracy" } else { "micro_f1" };
    summary.push(&format!("{key}_percent"), format_mean_sd(headline));
    summary.write(&out_dir.join("eval.txt"))?;
    out.write_all(summary.to_string().as_bytes())?;
    Ok(())
}

/// Header `topic_1 .. topic_r`, then one row per keyword rank.
pub fn format_keyword_table(topics: &[Vec<String>]) -> String {
    let mut table = (1..=topics.len()).map(|t| format!("topic_{t}")).collect::<Vec<_>>().join("\t");
    table.push('\n');
    let depth = topics.iter().map(Vec::len).max().unwrap_or(0);
    for row in 0..depth {
        let cells: Vec<&str> = topics.iter().map(|t| t.get(row).map_or("", String::as_str)).collect();
        table.push_str(&cells.join("\t"));
        table.push('\n');
    }
    table
}

fn topics(args: &TopicsArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&args.model)?;
    let vocab_path = args.vocab.clone().unwrap_or_else(|| args.model.join(VOCAB_FILE));
    let terms = read_lines(&vocab_path)?;
    ensure!(
        terms.len() == model.a.rows(),
        "{}: {} terms but the dictionary has {} rows",
        vocab_path.display(),
        terms.len(),
        model.a.rows()
    );
    let keywords = top_keywords(&model.a, &terms, args.top)?;
    let table = format_keyword_table(&keywords);
    let out_dir = args.out.clone().unwrap_or_else(|| args.model.clone());
    create_dir(&out_dir)?;
    write_text(&out_dir.join("keywords.tsv"), &table)?;
    write_matrix(&out_dir.join("B_normalized.csv"), &col_normalize(&model.b))?;
    out.write_all(table.as_bytes())?;
    Ok(())
}

fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let [n1, k, n2] = args.dims.as_slice() else {
        bail!("--dims takes three values n1,k,n2");
    };
    ensure!(args.seeds >= 1, "--seeds must be at least 1");
    let mut spec = SynthSpec::new(&args.noise, args.sigma1, args.sigma2, args.rank, (*n1, *k, *n2), args.seeds)?;
    spec.base_seed = args.seed;
    spec.restarts = args.restarts;
    spec.max_iters = args.iters;
    spec.tol = args.tol;
    let outcome = run_synth(&spec, worker_count())?;
    let (table, summary) = (outcome.table(), outcome.summary());
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_text(&dir.join("table.tsv"), &table)?;
        write_text(&dir.join("summary.txt"), &summary)?;
        for s in 0..args.seeds as u64 {
            let seed = args.seed.wrapping_add(s);
            let inst = ssnmf_core::synth::generate(&spec.noise, *n1, *k, *n2, seed)?;
            save_planted(&dir.join(format!("instance_{seed}")), &inst)?;
        }
    }
    out.write_all(table.as_bytes())?;
    out.write_all(summary.as_bytes())?;
    Ok(())
}
