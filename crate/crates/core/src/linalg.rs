//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest condition number accepted for the bin-probability matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Maximum absolute column sum.
pub fn norm_one(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse via LU with partial pivoting, plus the 1-norm condition number.
pub fn invert_with_condition(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    assert!(m.is_square(), "matrix must be square");
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::IndistinguishableLigands {
            condition: f64::INFINITY,
            limit: CONDITION_LIMIT,
        })?;
    let cond = norm_one(m) * norm_one(&inv);
    if !cond.is_finite() {
        return Err(Error::IndistinguishableLigands {
            condition: f64::INFINITY,
            limit: CONDITION_LIMIT,
        });
    }
    Ok((inv, cond))
}

/// `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Distance of `m` from the identity in max-abs.
pub fn identity_residual(m: &DMatrix<f64>) -> f64 {
    max_abs_diff(m, &DMatrix::identity(m.nrows(), m.ncols()))
}

/// Orthonormal basis of the hyperplane orthogonal to the all-ones vector
/// (Helmert contrasts), as an `n x (n-1)` matrix.
pub fn sum_zero_basis(n: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let kf = k as f64;
        let scale = 1.0 / (kf * (kf + 1.0)).sqrt();
        for i in 0..k {
            u[(i, k - 1)] = scale;
        }
        u[(k, k - 1)] = -kf * scale;
    }
    u
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_well_conditioned_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 2.0, 3.0]);
        let (inv, cond) = invert_with_condition(&m).unwrap();
        assert!(identity_residual(&(&m * &inv)) < 1e-14);
        // ||m||_1 = 6, ||inv||_1 = (3+2)/10 = 0.5... inv = [0.3 -0.1; -0.2 0.4]
        assert!((cond - 6.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            invert_with_condition(&m),
            Err(Error::IndistinguishableLigands { .. })
        ));
    }

    #[test]
    fn helmert_basis_is_orthonormal_and_sums_to_zero() {
        for n in 1..8 {
            let u = sum_zero_basis(n);
            let gram = u.transpose() * &u;
            assert!(identity_residual(&gram) < 1e-14);
            for c in u.column_iter() {
                assert!(c.sum().abs() < 1e-14);
            }
        }
    }
}
