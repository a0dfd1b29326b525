use crate::error::Result;
use crate::matrix::{guarded_ratio, Mask, Matrix};

use super::{Loss, Observations, SsnmfModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    A,
    B,
    S,
}

impl Factor {
    pub const ALL: [Factor; 3] = [Factor::A, Factor::B, Factor::S];
}

/// `∇F = positive − negative`, both parts entrywise nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSplit {
    pub positive: Matrix,
    pub negative: Matrix,
}

impl GradientSplit {
    pub fn gradient(&self) -> Matrix {
        self.positive.sub(&self.negative)
    }
}

/// Gradient halves of one block with respect to the block model `left·S`,
/// returned as `(positive, negative)` per unit of `∂loss/∂model`.
fn model_halves(loss: Loss, target: &Matrix, mask: &Mask, model: &Matrix, eps: f64) -> (Matrix, Matrix) {
    match loss {
        Loss::Frobenius => (mask.apply(model).scale(2.0), mask.apply(target).scale(2.0)),
        Loss::Divergence => (mask.as_matrix().clone(), guarded_ratio(&mask.apply(target), model, eps)),
    }
}

/// Exact gradient of the full objective with respect to one factor, split
/// into its positive and negative parts.
pub fn gradient_split(model: &SsnmfModel, obs: &Observations<'_>, factor: Factor) -> Result<GradientSplit> {
    obs.check_model(model)?;
    let eps = model.config.eps;
    let lambda = model.config.lambda;
    let s = model.s.as_matrix();
    let data = || model_halves(model.loss.recon(), obs.x, obs.w, &model.a.mul(s), eps);
    let labels = || model_halves(model.loss.sup(), obs.y, obs.l, &model.b.mul(s), eps);
    let split = match factor {
        Factor::A => {
            let (pos, neg) = data();
            GradientSplit { positive: pos.mul_tr(s), negative: neg.mul_tr(s) }
        }
        Factor::B => {
            let (pos, neg) = labels();
            GradientSplit { positive: pos.mul_tr(s).scale(lambda), negative: neg.mul_tr(s).scale(lambda) }
        }
        Factor::S => {
            let (dp, dn) = data();
            let (lp, ln) = labels();
            let a = model.a.as_matrix();
            let b = model.b.as_matrix();
            GradientSplit {
                positive: a.tr_mul(&dp).add(&b.tr_mul(&lp).scale(lambda)),
                negative: a.tr_mul(&dn).add(&b.tr_mul(&ln).scale(lambda)),
            }
        }
    };
    Ok(split)
}

/// `‖Θ ⊙ ∇_Θ F‖_∞` for `A`, `B` and `S`, in that order.
pub fn kkt_residual(model: &SsnmfModel, obs: &Observations<'_>) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (slot, factor) in out.iter_mut().zip(Factor::ALL) {
        let theta = match factor {
            Factor::A => &model.a,
            Factor::B => &model.b,
            Factor::S => &model.s,
        };
        *slot = theta.hadamard(&gradient_split(model, obs, factor)?.gradient()).max_abs();
    }
    Ok(out)
}
