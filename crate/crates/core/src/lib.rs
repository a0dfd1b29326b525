//! Semi-supervised nonnegative matrix factorization.
//!
//! Joint factorization of a data matrix `X ≈ AS` and a label matrix `Y ≈ BS`
//! with masked Frobenius or I-divergence error terms, trained by
//! multiplicative updates. The learned `B` doubles as a linear classifier on
//! the topic representation `S`, which gives single-label (argmax) and
//! multi-label (threshold sweep) prediction.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the corpus
//! reader and the command-line tools live in the `ssnmf` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod classify;
pub mod error;
pub mod loss;
pub mod matrix;
pub mod solver;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
pub use loss::{frob_sq, i_div};
pub use matrix::{col_normalize, safe_div, Mask, Matrix, NonnegMatrix, DEFAULT_EPS};
pub use solver::{
    fit, fit_nmf, init_factors, mu_step, objective, transform, FitReport, Loss, LossPair, NmfModel, Observations,
    SsnmfConfig, SsnmfModel, StopReason,
};
