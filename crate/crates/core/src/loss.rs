//! Masked reconstruction losses.

use crate::error::{Error, Result};
use crate::matrix::{Mask, Matrix, NonnegMatrix};

/// `Σ W_ij (A_ij − B_ij)²`.
pub fn frob_sq(a: &Matrix, b: &Matrix, w: &Mask) -> Result<f64> {
    b.check_shape("b", a.shape())?;
    w.check_shape("mask", a.shape())?;
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .zip(w.as_slice())
        .filter(|(_, &m)| m != 0.0)
        .map(|((x, y), _)| (x - y) * (x - y))
        .sum())
}

/// Masked information divergence `Σ_{W_ij=1} A_ij log(A_ij/B_ij) − A_ij + B_ij`,
/// with `0·log(0/b) = 0`.
///
/// An unmasked entry with `A_ij > 0` and `B_ij = 0` makes the divergence
/// infinite and is reported as [`Error::InfiniteDivergence`].
pub fn i_div(a: &NonnegMatrix, b: &NonnegMatrix, w: &Mask) -> Result<f64> {
    b.check_shape("b", a.shape())?;
    w.check_shape("mask", a.shape())?;
    i_div_unchecked(a, b, w)
}

pub(crate) fn i_div_unchecked(a: &Matrix, b: &Matrix, w: &Mask) -> Result<f64> {
    let cols = a.cols();
    let mut total = 0.0;
    for (idx, ((&x, &y), &m)) in a.as_slice().iter().zip(b.as_slice()).zip(w.as_slice()).enumerate() {
        if m == 0.0 {
            continue;
        }
        if x == 0.0 {
            total += y;
        } else if y == 0.0 {
            return Err(Error::InfiniteDivergence { row: idx / cols, col: idx % cols });
        } else {
            total += x * libm::log(x / y) - x + y;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn nn(v: f64) -> NonnegMatrix {
        NonnegMatrix::from_vec(1, 1, alloc::vec![v]).unwrap()
    }

    #[test]
    fn frob_examples() {
        let one = Mask::ones(1, 1);
        assert_eq!(frob_sq(&nn(3.0), &nn(1.0), &one).unwrap(), 4.0);
        assert_eq!(frob_sq(&nn(3.0), &nn(1.0), &Mask::zeros(1, 1)).unwrap(), 0.0);
        let a = NonnegMatrix::from_rows(&[[1.0, 2.0], [0.0, 5.0]]).unwrap();
        assert_eq!(frob_sq(&a, &a, &Mask::ones(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn frob_accepts_signed_operands() {
        let a = Matrix::from_rows(&[[-1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(frob_sq(&a, &b, &Mask::ones(1, 2)).unwrap(), 4.0);
    }

    #[test]
    fn i_div_examples() {
        let one = Mask::ones(1, 1);
        assert_abs_diff_eq!(i_div(&nn(1.0), &nn(2.0), &one).unwrap(), 1.0 - core::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(i_div(&nn(1.0), &nn(2.0), &one).unwrap(), 0.306853, epsilon = 1e-6);
        assert_abs_diff_eq!(i_div(&nn(0.0), &nn(0.7), &one).unwrap(), 0.7, epsilon = 1e-15);
        assert_eq!(i_div(&nn(0.0), &nn(0.0), &one).unwrap(), 0.0);
        assert_eq!(i_div(&nn(2.5), &nn(2.5), &one).unwrap(), 0.0);
    }

    #[test]
    fn i_div_reports_infinite_terms() {
        let a = NonnegMatrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let b = NonnegMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert_eq!(i_div(&a, &b, &Mask::ones(1, 2)), Err(Error::InfiniteDivergence { row: 0, col: 1 }));
        let masked = Mask::from_fn(1, 2, |_, j| j == 0);
        assert_eq!(i_div(&a, &b, &masked).unwrap(), 0.0);
    }

    #[test]
    fn shape_errors_name_operand() {
        let a = NonnegMatrix::zeros(2, 2);
        let b = NonnegMatrix::zeros(2, 3);
        assert!(matches!(frob_sq(&a, &b, &Mask::ones(2, 2)), Err(Error::Dimension { operand: "b", .. })));
        assert!(matches!(i_div(&a, &a, &Mask::ones(3, 2)), Err(Error::Dimension { operand: "mask", .. })));
    }
}
