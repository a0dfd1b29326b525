//! Multiplicative-update training for the four semi-supervised NMF variants.
//!
//! The objective is `R(W⊙X, W⊙AS) + λ·S(L⊙Y, L⊙BS)` where each of `R` and `S`
//! is either the squared Frobenius distance or the I-divergence. Every factor
//! is updated with `Θ ← Θ ⊙ [∇F]⁻ / [∇F]⁺`, in the order A, B, S. With no label
//! block (or `λ = 0`) the S-update reduces to plain NMF.

mod gradient;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss::{frob_sq, i_div_unchecked};
use crate::matrix::{guarded_ratio, ratio_update, Mask, Matrix, NonnegMatrix, DEFAULT_EPS};

pub use gradient::{gradient_split, kkt_residual, Factor, GradientSplit};

/// Error function applied to one block of the joint factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    Frobenius,
    Divergence,
}

impl Loss {
    fn code(self) -> char {
        match self {
            Loss::Frobenius => 'f',
            Loss::Divergence => 'd',
        }
    }
}

/// Which loss applies to the reconstruction and the supervision term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossPair {
    FF,
    FD,
    DF,
    DD,
}

impl LossPair {
    pub const ALL: [LossPair; 4] = [LossPair::FF, LossPair::FD, LossPair::DF, LossPair::DD];

    pub fn new(recon: Loss, sup: Loss) -> Self {
        match (recon, sup) {
            (Loss::Frobenius, Loss::Frobenius) => LossPair::FF,
            (Loss::Frobenius, Loss::Divergence) => LossPair::FD,
            (Loss::Divergence, Loss::Frobenius) => LossPair::DF,
            (Loss::Divergence, Loss::Divergence) => LossPair::DD,
        }
    }

    pub fn recon(self) -> Loss {
        match self {
            LossPair::FF | LossPair::FD => Loss::Frobenius,
            LossPair::DF | LossPair::DD => Loss::Divergence,
        }
    }

    pub fn sup(self) -> Loss {
        match self {
            LossPair::FF | LossPair::DF => Loss::Frobenius,
            LossPair::FD | LossPair::DD => Loss::Divergence,
        }
    }

    /// Coefficients `(c_recon, c_sup)` applied to the two gradient halves in
    /// the S-update. The factor 2 from the squared norm survives only where a
    /// Frobenius term meets a divergence term.
    fn s_update_weights(self, lambda: f64) -> (f64, f64) {
        match self {
            LossPair::FF | LossPair::DD => (1.0, lambda),
            LossPair::DF => (1.0, 2.0 * lambda),
            LossPair::FD => (2.0, lambda),
        }
    }
}

impl fmt::Display for LossPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.recon().code(), self.sup().code())
    }
}

impl FromStr for LossPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ff" => Ok(LossPair::FF),
            "fd" => Ok(LossPair::FD),
            "df" => Ok(LossPair::DF),
            "dd" => Ok(LossPair::DD),
            _ => Err(Error::InvalidParameter { name: "loss", reason: "expected one of ff, fd, df, dd" }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsnmfConfig {
    pub rank: usize,
    pub lambda: f64,
    pub max_iters: usize,
    /// Relative objective-change threshold.
    pub tol: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for SsnmfConfig {
    fn default() -> Self {
        SsnmfConfig { rank: 10, lambda: 1.0, max_iters: 100, tol: 1e-4, eps: DEFAULT_EPS, seed: 0 }
    }
}

impl SsnmfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if self.rank == 0 {
            return bad("rank", "must be at least 1");
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return bad("lambda", "must be finite and nonnegative");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be at least 1");
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad("tol", "must be nonnegative");
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad("eps", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    TolReached,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxIters => "max_iters",
            StopReason::TolReached => "tol_reached",
        })
    }
}

impl FromStr for StopReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_iters" => Ok(StopReason::MaxIters),
            "tol_reached" => Ok(StopReason::TolReached),
            _ => Err(Error::InvalidParameter { name: "stop_reason", reason: "unknown value" }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Objective after each completed iteration.
    pub objective_trace: Vec<f64>,
    pub stop_reason: StopReason,
    pub iters_run: usize,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Learned factors `A` (n1×r), `B` (k×r), `S` (r×n2).
#[derive(Debug, Clone, PartialEq)]
pub struct SsnmfModel {
    pub a: NonnegMatrix,
    pub b: NonnegMatrix,
    pub s: NonnegMatrix,
    pub config: SsnmfConfig,
    pub loss: LossPair,
}

impl SsnmfModel {
    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    pub fn reconstruction(&self) -> NonnegMatrix {
        self.a.product(&self.s)
    }

    pub fn label_scores(&self) -> NonnegMatrix {
        self.b.product(&self.s)
    }
}

/// Unsupervised factorization `X ≈ AS`.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel {
    pub a: NonnegMatrix,
    pub s: NonnegMatrix,
    pub config: SsnmfConfig,
    pub recon: Loss,
}

/// Borrowed training inputs: data `X` with mask `W`, labels `Y` with mask `L`.
#[derive(Debug, Clone, Copy)]
pub struct Observations<'a> {
    pub x: &'a NonnegMatrix,
    pub w: &'a Mask,
    pub y: &'a NonnegMatrix,
    pub l: &'a Mask,
}

impl<'a> Observations<'a> {
    pub fn new(x: &'a NonnegMatrix, w: &'a Mask, y: &'a NonnegMatrix, l: &'a Mask) -> Result<Self> {
        w.check_shape("W", x.shape())?;
        y.check_shape("Y", (y.rows(), x.cols()))?;
        l.check_shape("L", y.shape())?;
        Ok(Observations { x, w, y, l })
    }

    fn check_model(&self, model: &SsnmfModel) -> Result<()> {
        let r = model.a.cols();
        model.a.check_shape("A", (self.x.rows(), r))?;
        model.b.check_shape("B", (self.y.rows(), r))?;
        model.s.check_shape("S", (r, self.x.cols()))
    }
}

const STREAM_A: u64 = 0;
const STREAM_B: u64 = 1;
const STREAM_S: u64 = 2;

fn uniform_factor(rows: usize, cols: usize, seed: u64, stream: u64) -> NonnegMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // random() is on [0, 1); flip it onto (0, 1].
    NonnegMatrix::new_unchecked(Matrix::from_fn(rows, cols, |_, _| 1.0 - rng.random::<f64>()))
}

/// Strictly positive seeded initial factors `(A, B, S)`.
///
/// Each factor is drawn from its own stream of the seed, so an unsupervised
/// run with the same seed sees the same `A` and `S`.
pub fn init_factors(
    n1: usize,
    k: usize,
    n2: usize,
    config: &SsnmfConfig,
) -> (NonnegMatrix, NonnegMatrix, NonnegMatrix) {
    let r = config.rank;
    (
        uniform_factor(n1, r, config.seed, STREAM_A),
        uniform_factor(k, r, config.seed, STREAM_B),
        uniform_factor(r, n2, config.seed, STREAM_S),
    )
}

fn block_loss(loss: Loss, target: &Matrix, model: &Matrix, mask: &Mask) -> Result<f64> {
    match loss {
        Loss::Frobenius => frob_sq(target, model, mask),
        Loss::Divergence => i_div_unchecked(target, model, mask),
    }
}

/// `R(W⊙X, W⊙AS) + λ·S(L⊙Y, L⊙BS)` for the model's loss pair.
pub fn objective(model: &SsnmfModel, obs: &Observations<'_>) -> Result<f64> {
    obs.check_model(model)?;
    let recon = block_loss(model.loss.recon(), obs.x, &model.a.mul(&model.s), obs.w)?;
    if model.config.lambda == 0.0 {
        return Ok(recon);
    }
    let sup = block_loss(model.loss.sup(), obs.y, &model.b.mul(&model.s), obs.l)?;
    Ok(recon + model.config.lambda * sup)
}

/// Masked targets computed once per fit.
struct Block<'a> {
    target: &'a Matrix,
    mask: &'a Mask,
    masked: Matrix,
    loss: Loss,
}

impl<'a> Block<'a> {
    fn new(target: &'a Matrix, mask: &'a Mask, loss: Loss) -> Self {
        Block { target, mask, masked: mask.apply(target), loss }
    }

    fn value(&self, left: &Matrix, s: &Matrix) -> Result<f64> {
        block_loss(self.loss, self.target, &left.mul(s), self.mask)
    }

    /// Negative and positive gradient halves with respect to the left factor,
    /// up to a common positive scale.
    fn left_terms(&self, left: &Matrix, s: &Matrix, eps: f64) -> (Matrix, Matrix) {
        let model = left.mul(s);
        match self.loss {
            Loss::Frobenius => (self.masked.mul_tr(s), self.mask.apply(&model).mul_tr(s)),
            Loss::Divergence => (guarded_ratio(&self.masked, &model, eps).mul_tr(s), self.mask.mul_tr(s)),
        }
    }

    /// Negative and positive gradient halves with respect to `S`, up to the
    /// Frobenius factor 2.
    fn s_terms(&self, left: &Matrix, s: &Matrix, eps: f64) -> (Matrix, Matrix) {
        let model = left.mul(s);
        match self.loss {
            Loss::Frobenius => (left.tr_mul(&self.masked), left.tr_mul(&self.mask.apply(&model))),
            Loss::Divergence => (left.tr_mul(&guarded_ratio(&self.masked, &model, eps)), left.tr_mul(self.mask)),
        }
    }
}

struct Problem<'a> {
    data: Block<'a>,
    labels: Option<Block<'a>>,
    loss: LossPair,
    lambda: f64,
    eps: f64,
}

struct Factors {
    a: NonnegMatrix,
    b: Option<NonnegMatrix>,
    s: NonnegMatrix,
}

impl Problem<'_> {
    fn supervised(&self) -> bool {
        self.labels.is_some() && self.lambda != 0.0
    }

    fn objective(&self, f: &Factors) -> Result<f64> {
        let recon = self.data.value(&f.a, &f.s)?;
        match (&self.labels, &f.b) {
            (Some(labels), Some(b)) if self.supervised() => Ok(recon + self.lambda * labels.value(b, &f.s)?),
            _ => Ok(recon),
        }
    }

    fn step(&self, f: &mut Factors) {
        let (num, den) = self.data.left_terms(&f.a, &f.s, self.eps);
        ratio_update(f.a.inner_mut(), &num, &den, self.eps);

        if let (Some(labels), Some(b)) = (&self.labels, f.b.as_mut()) {
            let (num, den) = labels.left_terms(b, &f.s, self.eps);
            ratio_update(b.inner_mut(), &num, &den, self.eps);
        }

        let (mut num, mut den) = self.data.s_terms(&f.a, &f.s, self.eps);
        if let (true, Some(labels), Some(b)) = (self.supervised(), &self.labels, &f.b) {
            let (c_recon, c_sup) = self.loss.s_update_weights(self.lambda);
            let (sup_num, sup_den) = labels.s_terms(b, &f.s, self.eps);
            num = num.zip_map(&sup_num, |r, s| c_recon * r + c_sup * s);
            den = den.zip_map(&sup_den, |r, s| c_recon * r + c_sup * s);
        }
        ratio_update(f.s.inner_mut(), &num, &den, self.eps);
    }

    fn run(&self, f: &mut Factors, config: &SsnmfConfig) -> Result<FitReport> {
        let mut prev = self.objective(f)?;
        let mut trace = Vec::with_capacity(config.max_iters);
        let mut stop_reason = StopReason::MaxIters;
        for _ in 0..config.max_iters {
            self.step(f);
            let current = self.objective(f)?;
            trace.push(current);
            if libm::fabs(current - prev) / prev.max(config.eps) < config.tol {
                stop_reason = StopReason::TolReached;
                break;
            }
            prev = current;
        }
        Ok(FitReport { iters_run: trace.len(), objective_trace: trace, stop_reason })
    }
}

/// One A → B → S multiplicative-update sweep.
pub fn mu_step(model: &SsnmfModel, obs: &Observations<'_>) -> Result<SsnmfModel> {
    obs.check_model(model)?;
    let problem = Problem {
        data: Block::new(obs.x, obs.w, model.loss.recon()),
        labels: Some(Block::new(obs.y, obs.l, model.loss.sup())),
        loss: model.loss,
        lambda: model.config.lambda,
        eps: model.config.eps,
    };
    let mut f = Factors { a: model.a.clone(), b: Some(model.b.clone()), s: model.s.clone() };
    problem.step(&mut f);
    Ok(SsnmfModel { a: f.a, b: f.b.expect("label factor kept"), s: f.s, config: model.config, loss: model.loss })
}

/// Trains a model from seeded random factors until the relative objective
/// change drops below `config.tol` or `config.max_iters` sweeps have run.
pub fn fit(obs: &Observations<'_>, loss: LossPair, config: &SsnmfConfig) -> Result<(SsnmfModel, FitReport)> {
    config.validate()?;
    let (a, b, s) = init_factors(obs.x.rows(), obs.y.rows(), obs.x.cols(), config);
    let problem = Problem {
        data: Block::new(obs.x, obs.w, loss.recon()),
        labels: Some(Block::new(obs.y, obs.l, loss.sup())),
        loss,
        lambda: config.lambda,
        eps: config.eps,
    };
    let mut f = Factors { a, b: Some(b), s };
    let report = problem.run(&mut f, config)?;
    let model = SsnmfModel { a: f.a, b: f.b.expect("label factor kept"), s: f.s, config: *config, loss };
    Ok((model, report))
}

/// Plain NMF `min R(W⊙X, W⊙AS)`; `config.lambda` is ignored.
pub fn fit_nmf(x: &NonnegMatrix, w: &Mask, recon: Loss, config: &SsnmfConfig) -> Result<(NmfModel, FitReport)> {
    config.validate()?;
    w.check_shape("W", x.shape())?;
    let r = config.rank;
    let problem = Problem {
        data: Block::new(x, w, recon),
        labels: None,
        loss: LossPair::new(recon, recon),
        lambda: 0.0,
        eps: config.eps,
    };
    let mut f = Factors {
        a: uniform_factor(x.rows(), r, config.seed, STREAM_A),
        b: None,
        s: uniform_factor(r, x.cols(), config.seed, STREAM_S),
    };
    let report = problem.run(&mut f, config)?;
    Ok((NmfModel { a: f.a, s: f.s, config: *config, recon }, report))
}

/// Representation of held-out data in the span of a fixed dictionary:
/// `argmin_{S ≥ 0} R(W⊙X, W⊙AS)` by S-only multiplicative updates.
pub fn transform(
    x: &NonnegMatrix,
    w: &Mask,
    a: &NonnegMatrix,
    recon: Loss,
    config: &SsnmfConfig,
) -> Result<NonnegMatrix> {
    transform_with_report(x, w, a, recon, config).map(|(s, _)| s)
}

pub fn transform_with_report(
    x: &NonnegMatrix,
    w: &Mask,
    a: &NonnegMatrix,
    recon: Loss,
    config: &SsnmfConfig,
) -> Result<(NonnegMatrix, FitReport)> {
    config.validate()?;
    a.check_shape("A", (x.rows(), config.rank))?;
    w.check_shape("W", x.shape())?;
    let data = Block::new(x, w, recon);
    let mut s = uniform_factor(config.rank, x.cols(), config.seed, STREAM_S);
    let mut prev = data.value(a, &s)?;
    let mut trace = Vec::new();
    let mut stop_reason = StopReason::MaxIters;
    for _ in 0..config.max_iters {
        let (num, den) = data.s_terms(a, &s, config.eps);
        ratio_update(s.inner_mut(), &num, &den, config.eps);
        let current = data.value(a, &s)?;
        trace.push(current);
        if libm::fabs(current - prev) / prev.max(config.eps) < config.tol {
            stop_reason = StopReason::TolReached;
            break;
        }
        prev = current;
    }
    Ok((s, FitReport { iters_run: trace.len(), objective_trace: trace, stop_reason }))
}
