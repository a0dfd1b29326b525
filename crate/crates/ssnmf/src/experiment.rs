//! Synthetic noise-model experiments and trial statistics.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssnmf_core::synth::{generate, mle_lambda, Noise, NoiseModel, PlantedInstance};
use ssnmf_core::text::{Corpus, Document, Split};
use ssnmf_core::{fit, frob_sq, LossPair, Mask, Observations, SsnmfConfig, SsnmfModel};

use crate::parallel::ordered_map;

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Fractions reported as `"81.88 (0.44)"` in percent.
pub fn format_mean_sd(values: &[f64]) -> String {
    let (mean, sd) = mean_sd(values);
    format!("{:.2} ({:.2})", 100.0 * mean, 100.0 * sd)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One-sided sign test: `P(Bin(n, 1/2) ≥ wins)`.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    // Log-space binomial terms keep large `n` finite.
    let ln_choose = |k: usize| -> f64 { (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum() };
    (wins..=n).map(|k| (ln_choose(k) - n as f64 * std::f64::consts::LN_2).exp()).sum::<f64>().min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub noise: NoiseModel,
    pub sigma1: f64,
    pub sigma2: f64,
    pub dims: (usize, usize, usize),
    pub seeds: usize,
    pub base_seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl SynthSpec {
    pub fn new(
        code: &str,
        sigma1: f64,
        sigma2: f64,
        rank: usize,
        dims: (usize, usize, usize),
        seeds: usize,
    ) -> ssnmf_core::Result<Self> {
        Ok(SynthSpec {
            noise: NoiseModel::from_code(code, sigma1, sigma2, rank)?,
            sigma1,
            sigma2,
            dims,
            seeds,
            base_seed: 0,
            restarts: 5,
            max_iters: 500,
            tol: 1e-8,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthRow {
    pub seed: u64,
    pub variant: LossPair,
    pub lambda: f64,
    pub heldout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub rival: LossPair,
    pub wins: usize,
    pub decided: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutcome {
    pub rows: Vec<SynthRow>,
    pub medians: Vec<(LossPair, f64)>,
    pub best: LossPair,
    pub matched: LossPair,
    pub sign_tests: Vec<SignTest>,
}

impl SynthOutcome {
    /// The matched variant has the best median and beats every rival at the
    /// 5% level.
    pub fn consistent(&self) -> bool {
        self.best == self.matched && self.sign_tests.iter().all(|t| t.p_value < 0.05)
    }

    pub fn table(&self) -> String {
        let mut out = String::from("seed\tvariant\tlambda\theldout\n");
        for r in &self.rows {
            writeln!(out, "{}\t{}\t{}\t{}", r.seed, r.variant, r.lambda, r.heldout).expect("string write");
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (v, m) in &self.medians {
            writeln!(out, "median_{v}={m}").expect("string write");
        }
        for t in &self.sign_tests {
            writeln!(out, "sign_test_{}_vs_{}={}/{} p={:.4}", self.matched, t.rival, t.wins, t.decided, t.p_value)
                .expect("string write");
        }
        writeln!(out, "best_median={} matched={}", self.best, self.matched).expect("string write");
        out
    }
}

/// Held-out error of a fitted reconstruction against fresh data, measured in
/// the loss matched to the data noise.
pub fn heldout_error(model: &SsnmfModel, fresh: &PlantedInstance) -> ssnmf_core::Result<f64> {
    let w = Mask::ones(fresh.x.rows(), fresh.x.cols());
    match fresh.noise.data {
        Noise::Poisson => ssnmf_core::loss::i_div(&fresh.x, &model.reconstruction(), &w),
        Noise::Gaussian { .. } => frob_sq(&fresh.x, &model.reconstruction(), &w),
    }
}

/// Lowest-objective fit over `restarts` seeded initializations.
pub fn best_of_restarts(
    inst: &PlantedInstance,
    loss: LossPair,
    config: &SsnmfConfig,
    restarts: usize,
) -> ssnmf_core::Result<(SsnmfModel, f64)> {
    let w = Mask::ones(inst.x.rows(), inst.x.cols());
    let l = Mask::ones(inst.y.rows(), inst.y.cols());
    let obs = Observations::new(&inst.x, &w, &inst.y, &l)?;
    let mut best: Option<(SsnmfModel, f64)> = None;
    for restart in 0..restarts.max(1) {
        let cfg = SsnmfConfig { seed: config.seed.wrapping_add(restart as u64), ..*config };
        let (model, report) = fit(&obs, loss, &cfg)?;
        let obj = report.final_objective();
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((model, obj));
        }
    }
    Ok(best.expect("at least one restart"))
}

fn run_instance(spec: &SynthSpec, seed: u64) -> ssnmf_core::Result<Vec<SynthRow>> {
    let (n1, k, n2) = spec.dims;
    let r = spec.noise.rank;
    let inst = generate(&spec.noise, n1, k, n2, seed)?;
    let fresh = inst.redraw(!seed);
    LossPair::ALL
        .iter()
        .map(|&variant| {
            let (lambda, _) = mle_lambda(&NoiseModel::matched_to(variant, spec.sigma1, spec.sigma2, r)?);
            let cfg = SsnmfConfig {
                rank: r,
                lambda,
                max_iters: spec.max_iters,
                tol: spec.tol,
                seed: 0,
                ..SsnmfConfig::default()
            };
            let (model, _) = best_of_restarts(&inst, variant, &cfg, spec.restarts)?;
            Ok(SynthRow { seed, variant, lambda, heldout: heldout_error(&model, &fresh)? })
        })
        .collect()
}

/// Fits every variant with its noise-matched `λ` on `spec.seeds` instances
/// and compares held-out errors on fresh draws of the same ground truth.
pub fn run_synth(spec: &SynthSpec, workers: usize) -> ssnmf_core::Result<SynthOutcome> {
    let seeds: Vec<u64> = (0..spec.seeds as u64).map(|s| spec.base_seed.wrapping_add(s)).collect();
    let per_seed = ordered_map(&seeds, workers, |&s| run_instance(spec, s));
    let mut rows = Vec::with_capacity(seeds.len() * 4);
    for r in per_seed {
        rows.extend(r?);
    }
    let errors = |v: LossPair| -> Vec<f64> { rows.iter().filter(|r| r.variant == v).map(|r| r.heldout).collect() };
    let medians: Vec<(LossPair, f64)> = LossPair::ALL.iter().map(|&v| (v, median(&errors(v)))).collect();
    let best = medians.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("four variants").0;
    let matched = mle_lambda(&spec.noise).1;
    let mine = errors(matched);
    let sign_tests = LossPair::ALL
        .iter()
        .filter(|&&v| v != matched)
        .map(|&rival| {
            let theirs = errors(rival);
            let wins = mine.iter().zip(&theirs).filter(|(m, t)| m < t).count();
            let decided = mine.iter().zip(&theirs).filter(|(m, t)| m != t).count();
            SignTest { rival, wins, decided, p_value: sign_test_p(wins, decided) }
        })
        .collect();
    Ok(SynthOutcome { rows, medians, best, matched, sign_tests })
}

/// A corpus whose classes are separated by disjoint topic vocabularies plus
/// a shared background vocabulary. Splits are 60/20/20 train/val/test.
pub fn separable_corpus(classes: usize, docs: usize, seed: u64) -> Corpus {
    const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "nu", "pe", "ra", "si", "to", "vu", "we", "xo", "zy"];
    let word = |class: usize, idx: usize| -> String {
        let mut w = String::from(SYLLABLES[class % SYLLABLES.len()]);
        w.push_str(SYLLABLES[idx % SYLLABLES.len()]);
        w.push_str(SYLLABLES[(idx / SYLLABLES.len()) % SYLLABLES.len()]);
        w
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..docs).collect();
    order.shuffle(&mut rng);
    let documents = (0..docs)
        .map(|d| {
            let class = d % classes;
            let len = rng.random_range(20..40);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.7) {
                        word(class, rng.random_range(0..15))
                    } else {
                        format!("bg{}", word(classes, rng.random_range(0..30)))
                    }
                })
                .collect();
            let split = match order[d] * 10 / docs {
                0..=5 => Split::Train,
                6 | 7 => Split::Val,
                _ => Split::Test,
            };
            Document { id: format!("doc{d:04}"), labels: vec![format!("class{class}")], split, text: words.join(" ") }
        })
        .collect();
    Corpus::new(documents).expect("generated ids are unique")
}
