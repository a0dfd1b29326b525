//! Prediction with a trained model and the evaluation metrics.
//!
//! Test data is projected onto the learned dictionary (`S_test`), scored
//! with the learned label factor (`B · S_test`), and then labeled either by
//! columnwise argmax (single-label) or by a per-column min/max threshold
//! (multi-label).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{Mask, Matrix, NonnegMatrix};
use crate::solver::{fit, transform, LossPair, Observations, SsnmfConfig, SsnmfModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Exactly one label per column.
    Single,
    /// Any number of labels per column.
    Multi,
}

/// Binary `classes × points` label matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    entries: Matrix,
    mode: LabelMode,
}

impl LabelMatrix {
    pub fn new(entries: Matrix, mode: LabelMode) -> Result<Self> {
        let entries = Mask::new(entries)?.as_matrix().clone();
        if mode == LabelMode::Single {
            for j in 0..entries.cols() {
                let count = (0..entries.rows()).filter(|&i| entries.get(i, j) != 0.0).count();
                if count != 1 {
                    return Err(Error::InvalidParameter {
                        name: "labels",
                        reason: "single-label columns must contain exactly one 1",
                    });
                }
            }
        }
        Ok(LabelMatrix { entries, mode })
    }

    /// Single mode when every column has exactly one label, multi otherwise.
    pub fn inferred(entries: Matrix) -> Result<Self> {
        let single =
            (0..entries.cols()).all(|j| (0..entries.rows()).filter(|&i| entries.get(i, j) != 0.0).count() == 1);
        let mode = if single { LabelMode::Single } else { LabelMode::Multi };
        Self::new(entries, mode)
    }

    /// One-hot matrix from class indices, one per point.
    pub fn from_classes(classes: usize, assignments: &[usize]) -> Result<Self> {
        if assignments.iter().any(|&c| c >= classes) {
            return Err(Error::InvalidParameter { name: "labels", reason: "class index out of range" });
        }
        let m = Matrix::from_fn(classes, assignments.len(), |i, j| if assignments[j] == i { 1.0 } else { 0.0 });
        Self::new(m, LabelMode::Single)
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn classes(&self) -> usize {
        self.entries.rows()
    }

    pub fn points(&self) -> usize {
        self.entries.cols()
    }

    pub fn is_set(&self, class: usize, point: usize) -> bool {
        self.entries.get(class, point) != 0.0
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.entries
    }

    /// The label matrix viewed as training data `Y`.
    pub fn to_nonneg(&self) -> NonnegMatrix {
        NonnegMatrix::new(self.entries.clone()).expect("binary entries")
    }

    /// Row index of the single label in each column (`None` for empty columns).
    pub fn class_of(&self, point: usize) -> Option<usize> {
        (0..self.classes()).find(|&i| self.is_set(i, point))
    }

    /// Same entries, reinterpreted as a multi-label matrix.
    pub fn into_multi(self) -> LabelMatrix {
        LabelMatrix { entries: self.entries, mode: LabelMode::Multi }
    }
}

/// Columnwise argmax one-hot; ties go to the lowest row index.
pub fn label_argmax(scores: &Matrix) -> LabelMatrix {
    let mut out = Matrix::zeros(scores.rows(), scores.cols());
    for j in 0..scores.cols() {
        let mut best = 0;
        for i in 1..scores.rows() {
            if scores.get(i, j) > scores.get(best, j) {
                best = i;
            }
        }
        out.set(best, j, 1.0);
    }
    LabelMatrix { entries: out, mode: LabelMode::Single }
}

/// `B_train · S_test` with `S_test` from the one-sided projection of `X_test`.
pub fn predict_scores(model: &SsnmfModel, x_test: &NonnegMatrix, w_test: &Mask) -> Result<NonnegMatrix> {
    let s_test = transform(x_test, w_test, &model.a, model.loss.recon(), &model.config)?;
    Ok(model.b.product(&s_test))
}

pub fn predict_single(model: &SsnmfModel, x_test: &NonnegMatrix, w_test: &Mask) -> Result<LabelMatrix> {
    Ok(label_argmax(predict_scores(model, x_test, w_test)?.as_matrix()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter { name: "alpha", reason: "must lie in [0, 1]" });
    }
    Ok(())
}

/// Predicts label `i` for point `j` iff `score_ij ≥ min_j + α (max_j − min_j)`.
pub fn threshold_predict(scores: &Matrix, alpha: f64) -> Result<LabelMatrix> {
    check_alpha(alpha)?;
    let mut out = Matrix::zeros(scores.rows(), scores.cols());
    for j in 0..scores.cols() {
        let (lo, hi) = (0..scores.rows())
            .map(|i| scores.get(i, j))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let threshold = lo + alpha * (hi - lo);
        for i in 0..scores.rows() {
            // Clamp so that alpha = 1 always keeps the column max despite rounding.
            if scores.get(i, j) >= threshold.min(hi) {
                out.set(i, j, 1.0);
            }
        }
    }
    Ok(LabelMatrix { entries: out, mode: LabelMode::Multi })
}

/// Uniform grid of `grid_size` points on `[0, 1]`.
pub fn alpha_grid(grid_size: usize) -> Vec<f64> {
    let last = (grid_size - 1) as f64;
    (0..grid_size).map(|i| if i + 1 == grid_size { 1.0 } else { i as f64 / last }).collect()
}

/// Best micro-F1 over the threshold grid; the smallest maximizing `α` wins ties.
pub fn best_threshold_score(scores: &Matrix, truth: &LabelMatrix, grid_size: usize) -> Result<(f64, f64)> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter { name: "grid_size", reason: "must be at least 2" });
    }
    let mut best = (0.0, f64::NEG_INFINITY);
    for alpha in alpha_grid(grid_size) {
        let score = micro_f1(&threshold_predict(scores, alpha)?, truth)?;
        if score > best.1 {
            best = (alpha, score);
        }
    }
    Ok(best)
}

fn check_same_shape(pred: &LabelMatrix, truth: &LabelMatrix) -> Result<()> {
    pred.entries.check_shape("predictions", truth.entries.shape())
}

/// Fraction of points whose predicted one-hot column equals the true one.
pub fn accuracy(truth: &LabelMatrix, pred: &LabelMatrix) -> Result<f64> {
    check_same_shape(pred, truth)?;
    if truth.mode != LabelMode::Single || pred.mode != LabelMode::Single {
        return Err(Error::InvalidParameter { name: "mode", reason: "accuracy needs single-label matrices" });
    }
    let correct = (0..truth.points()).filter(|&j| truth.class_of(j) == pred.class_of(j)).count();
    Ok(correct as f64 / truth.points() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn micro_f1(&self) -> f64 {
        let denom = 2 * self.true_pos + self.false_pos + self.false_neg;
        if denom == 0 {
            return 1.0;
        }
        (2 * self.true_pos) as f64 / denom as f64
    }
}

/// Confusion totals pooled over every (label, point) pair.
pub fn confusion(pred: &LabelMatrix, truth: &LabelMatrix) -> Result<Confusion> {
    check_same_shape(pred, truth)?;
    let mut c = Confusion::default();
    for (&p, &t) in pred.entries.as_slice().iter().zip(truth.entries.as_slice()) {
        match (p != 0.0, t != 0.0) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// `2TP / (2TP + FP + FN)`, or 1 when there are no positives at all.
pub fn micro_f1(pred: &LabelMatrix, truth: &LabelMatrix) -> Result<f64> {
    Ok(confusion(pred, truth)?.micro_f1())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub tol_candidates: Vec<f64>,
    pub lam_candidates: Vec<f64>,
}

impl GridSpec {
    pub fn new(tol_candidates: Vec<f64>, lam_candidates: Vec<f64>) -> Result<Self> {
        if tol_candidates.is_empty() || lam_candidates.is_empty() {
            return Err(Error::InvalidParameter { name: "grid", reason: "candidate lists must be non-empty" });
        }
        Ok(GridSpec { tol_candidates, lam_candidates })
    }

    /// Cells as `(tol, lambda)`, tol-major.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.tol_candidates.iter().flat_map(|&tol| self.lam_candidates.iter().map(move |&lam| (tol, lam))).collect()
    }
}

/// Configuration of one grid cell for a given trial.
pub fn cell_config(base: &SsnmfConfig, cell: (f64, f64), trial: usize) -> SsnmfConfig {
    SsnmfConfig { tol: cell.0, lambda: cell.1, seed: base.seed.wrapping_add(trial as u64), ..*base }
}

/// Validation accuracy of a single trial.
pub fn validation_accuracy(
    obs: &Observations<'_>,
    x_val: &NonnegMatrix,
    y_val: &LabelMatrix,
    loss: LossPair,
    config: &SsnmfConfig,
) -> Result<f64> {
    let (model, _) = fit(obs, loss, config)?;
    let w_val = Mask::ones(x_val.rows(), x_val.cols());
    accuracy(y_val, &predict_single(&model, x_val, &w_val)?)
}

/// Index of the best cell given per-cell mean scores; ties prefer smaller
/// `λ`, then smaller `tol`.
pub fn select_cell(cells: &[(f64, f64)], scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (idx, (&(tol, lam), &score)) in cells.iter().zip(scores).enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let (btol, blam) = cells[b];
                let bscore = scores[b];
                score > bscore || (score == bscore && (lam < blam || (lam == blam && tol < btol)))
            }
        };
        if better {
            best = Some(idx);
        }
    }
    best
}

/// Outcome of a grid search: the chosen configuration and every cell's mean
/// validation accuracy in [`GridSpec::cells`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub config: SsnmfConfig,
    pub cell_scores: Vec<f64>,
}

/// Picks `(tol, λ)` by mean validation accuracy over `trials` seeds per cell.
pub fn grid_search(
    obs: &Observations<'_>,
    x_val: &NonnegMatrix,
    y_val: &LabelMatrix,
    loss: LossPair,
    base: &SsnmfConfig,
    grid: &GridSpec,
    trials: usize,
) -> Result<GridOutcome> {
    if trials == 0 {
        return Err(Error::InvalidParameter { name: "trials", reason: "must be at least 1" });
    }
    let cells = grid.cells();
    let mut cell_scores = Vec::with_capacity(cells.len());
    for &cell in &cells {
        let mut total = 0.0;
        for trial in 0..trials {
            total += validation_accuracy(obs, x_val, y_val, loss, &cell_config(base, cell, trial))?;
        }
        cell_scores.push(total / trials as f64);
    }
    let best = select_cell(&cells, &cell_scores).ok_or(Error::InvalidParameter { name: "grid", reason: "empty" })?;
    Ok(GridOutcome { config: cell_config(base, cells[best], 0), cell_scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    fn column_of(l: &LabelMatrix) -> Vec<f64> {
        l.as_matrix().column(0)
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(column_of(&label_argmax(&col(&[0.2, 0.5, 0.3]))), [0.0, 1.0, 0.0]);
        assert_eq!(column_of(&label_argmax(&col(&[0.4, 0.4]))), [1.0, 0.0]);
        assert_eq!(column_of(&label_argmax(&col(&[0.0, 0.0, 0.0]))), [1.0, 0.0, 0.0]);
        assert_eq!(label_argmax(&col(&[0.4, 0.4])).mode(), LabelMode::Single);
    }

    #[test]
    fn threshold_examples() {
        let c = col(&[1.0, 2.0, 4.0]);
        assert_eq!(column_of(&threshold_predict(&c, 0.5).unwrap()), [0.0, 0.0, 1.0]);
        assert_eq!(column_of(&threshold_predict(&c, 0.0).unwrap()), [1.0, 1.0, 1.0]);
        assert_eq!(column_of(&threshold_predict(&c, 1.0).unwrap()), [0.0, 0.0, 1.0]);
        assert_eq!(column_of(&threshold_predict(&col(&[3.0, 3.0]), 0.7).unwrap()), [1.0, 1.0]);
        assert!(threshold_predict(&c, 1.5).is_err());
        assert!(threshold_predict(&c, -0.1).is_err());
    }

    #[test]
    fn threshold_at_one_keeps_max_under_rounding() {
        let c = col(&[0.1, 0.7, 0.30000000000000004]);
        assert!(threshold_predict(&c, 1.0).unwrap().is_set(1, 0));
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(alpha_grid(2), [0.0, 1.0]);
        let g = alpha_grid(101);
        assert_eq!((g[0], g[50], g[100]), (0.0, 0.5, 1.0));
    }

    #[test]
    fn best_threshold_on_scaled_truth_is_perfect() {
        let truth = LabelMatrix::from_classes(3, &[0, 2, 1, 1]).unwrap().into_multi();
        let scores = truth.as_matrix().scale(10.0);
        let (alpha, score) = best_threshold_score(&scores, &truth, 11).unwrap();
        assert_eq!(score, 1.0);
        assert!(alpha > 0.0);
        assert!(best_threshold_score(&scores, &truth, 1).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let truth = LabelMatrix::from_classes(2, &[0, 1, 0, 1]).unwrap();
        assert_eq!(accuracy(&truth, &truth).unwrap(), 1.0);
        let half = LabelMatrix::from_classes(2, &[0, 1, 1, 0]).unwrap();
        assert_eq!(accuracy(&truth, &half).unwrap(), 0.5);
        let none = LabelMatrix::from_classes(2, &[1, 0, 1, 0]).unwrap();
        assert_eq!(accuracy(&truth, &none).unwrap(), 0.0);
        assert!(accuracy(&truth, &truth.clone().into_multi()).is_err());
        let short = LabelMatrix::from_classes(2, &[0, 1]).unwrap();
        assert!(matches!(accuracy(&truth, &short), Err(Error::Dimension { .. })));
    }

    #[test]
    fn micro_f1_examples() {
        let truth = LabelMatrix::new(Matrix::from_rows(&[[1.0, 1.0, 0.0], [1.0, 0.0, 0.0]]).unwrap(), LabelMode::Multi)
            .unwrap();
        assert_eq!(micro_f1(&truth, &truth).unwrap(), 1.0);
        // TP = 2, FP = 1, FN = 1.
        let pred = LabelMatrix::new(Matrix::from_rows(&[[1.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap(), LabelMode::Multi)
            .unwrap();
        let c = confusion(&pred, &truth).unwrap();
        assert_eq!((c.true_pos, c.false_pos, c.false_neg), (2, 1, 1));
        assert!((micro_f1(&pred, &truth).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        let empty = LabelMatrix::new(Matrix::zeros(2, 3), LabelMode::Multi).unwrap();
        assert_eq!(micro_f1(&empty, &truth).unwrap(), 0.0);
        assert_eq!(micro_f1(&empty, &empty).unwrap(), 1.0);
    }

    #[test]
    fn label_matrix_validation() {
        assert!(LabelMatrix::new(Matrix::from_rows(&[[1.0], [1.0]]).unwrap(), LabelMode::Single).is_err());
        assert!(LabelMatrix::new(Matrix::from_rows(&[[0.5], [1.0]]).unwrap(), LabelMode::Multi).is_err());
        let inferred = LabelMatrix::inferred(Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(inferred.mode(), LabelMode::Multi);
        assert!(LabelMatrix::from_classes(2, &[2]).is_err());
    }

    #[test]
    fn cell_selection_tie_breaks() {
        let cells = [(1e-3, 1.0), (1e-4, 1.0), (1e-3, 0.5), (1e-2, 2.0)];
        assert_eq!(select_cell(&cells, &[0.8, 0.8, 0.8, 0.7]), Some(2));
        assert_eq!(select_cell(&cells, &[0.8, 0.8, 0.7, 0.7]), Some(1));
        assert_eq!(select_cell(&cells, &[0.1, 0.2, 0.3, 0.9]), Some(3));
        assert!(GridSpec::new(Vec::new(), alloc::vec![1.0]).is_err());
    }
}
