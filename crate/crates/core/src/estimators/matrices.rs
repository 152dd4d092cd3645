use nalgebra::DMatrix;

use super::ThresholdScheme;
use crate::error::{domain, Error, Result};
use crate::linalg::{invert_with_condition, max_abs_diff, CONDITION_LIMIT};

/// Below this ν the upper-triangular approximation is poor.
pub const BIASED_NU_WARNING: f64 = 5.0;

/// `s_ij = exp(-k_j T_{i-1}) - exp(-k_j T_i)`: probability that a ligand of
/// type `j` stays bound for a time in interval `i`.
///
/// `rates` may hold more columns than the scheme has intervals, which is how
/// unknown ligand types are represented.
pub fn bin_probability_matrix(scheme: &ThresholdScheme, rates: &[f64]) -> DMatrix<f64> {
    let t = scheme.thresholds();
    let m = scheme.intervals();
    DMatrix::from_fn(m, rates.len(), |i, j| {
        survival(rates[j], t[i]) - survival(rates[j], t[i + 1])
    })
}

fn survival(rate: f64, t: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        (-rate * t).exp()
    }
}

/// `S` and its inverse `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasedWeights {
    pub s: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// 1-norm condition number of `S`.
    pub condition: f64,
}

/// Builds `S` and inverts it, rejecting near-duplicate rates.
pub fn build_s(scheme: &ThresholdScheme, rates: &[f64]) -> Result<UnbiasedWeights> {
    if rates.len() != scheme.intervals() {
        return Err(domain(format!(
            "scheme has {} intervals but {} rates were given",
            scheme.intervals(),
            rates.len()
        )));
    }
    let s = bin_probability_matrix(scheme, rates);
    let (w, condition) = invert_with_condition(&s)?;
    if condition > CONDITION_LIMIT {
        return Err(Error::IndistinguishableLigands {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    Ok(UnbiasedWeights { s, w, condition })
}

/// Upper-triangular approximation `H` of `S` and its inverse `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedWeights {
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// `h_ii = exp(-k_i T_{i-1})`, `h_ij = s_ij` above the diagonal, zero below.
pub fn triangular_approximation(scheme: &ThresholdScheme, rates: &[f64]) -> DMatrix<f64> {
    let t = scheme.thresholds();
    let s = bin_probability_matrix(scheme, rates);
    DMatrix::from_fn(rates.len(), rates.len(), |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => s[(i, j)],
        std::cmp::Ordering::Equal => survival(rates[i], t[i]),
        std::cmp::Ordering::Greater => 0.0,
    })
}

/// Inverse of `H` by the column recursion
/// `r_ij = κ_j (δ_ij − Σ_{l=i}^{j-1} r_il h_lj)` with `κ_j = exp(k_j T_{j-1})`.
pub fn triangular_inverse_recursive(scheme: &ThresholdScheme, rates: &[f64]) -> DMatrix<f64> {
    let t = scheme.thresholds();
    let h = triangular_approximation(scheme, rates);
    let m = rates.len();
    let mut r = DMatrix::zeros(m, m);
    for j in 0..m {
        let kappa = (rates[j] * t[j]).exp();
        for i in 0..=j {
            let delta = if i == j { 1.0 } else { 0.0 };
            let acc: f64 = (i..j).map(|l| r[(i, l)] * h[(l, j)]).sum();
            r[(i, j)] = kappa * (delta - acc);
        }
    }
    r
}

/// Builds `H` and `R`, computing `R` twice (recursion and triangular
/// back-substitution) and checking the two agree. Warns for small ν.
pub fn build_r(scheme: &ThresholdScheme, rates: &[f64]) -> Result<BiasedWeights> {
    if scheme.nu() < BIASED_NU_WARNING {
        log::warn!(
            "ν = {} is below {BIASED_NU_WARNING}; the triangular approximation may be poor",
            scheme.nu()
        );
    }
    triangular_weights(scheme, rates)
}

fn triangular_weights(scheme: &ThresholdScheme, rates: &[f64]) -> Result<BiasedWeights> {
    if rates.len() != scheme.intervals() {
        return Err(domain(format!(
            "scheme has {} intervals but {} rates were given",
            scheme.intervals(),
            rates.len()
        )));
    }
    let h = triangular_approximation(scheme, rates);
    let r = triangular_inverse_recursive(scheme, rates);
    let direct = h
        .solve_upper_triangular(&DMatrix::identity(rates.len(), rates.len()))
        .ok_or_else(|| Error::Internal("triangular matrix H is singular".into()))?;
    let scale = r.amax().max(1.0);
    let mismatch = max_abs_diff(&r, &direct) / scale;
    if mismatch > 1e-6 {
        return Err(Error::Internal(format!(
            "recursive and direct inverses of H differ by {mismatch:.3e}"
        )));
    }
    Ok(BiasedWeights { h, r })
}

/// Everything a receiver hardwires for a given set of known rates and ν.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorMatrices {
    pub rates: Vec<f64>,
    pub scheme: ThresholdScheme,
    pub s: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub condition: f64,
}

impl EstimatorMatrices {
    pub fn new(scheme: &ThresholdScheme, rates: &[f64]) -> Result<Self> {
        let UnbiasedWeights { s, w, condition } = build_s(scheme, rates)?;
        let BiasedWeights { h, r } = triangular_weights(scheme, rates)?;
        Ok(Self {
            rates: rates.to_vec(),
            scheme: scheme.clone(),
            s,
            w,
            h,
            r,
            condition,
        })
    }

    pub fn nu(&self) -> f64 {
        self.scheme.nu()
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}
