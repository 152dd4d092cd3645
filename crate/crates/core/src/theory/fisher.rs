use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::concentration_variance;
use crate::error::{domain, Error, Result};
use crate::linalg::{invert_with_condition, sum_zero_basis};
use crate::quadrature::integrate;

/// Relative tolerance used for Fisher information integrals by default.
pub const FISHER_TOLERANCE: f64 = 1e-8;

/// Fisher information of the concentration ratios carried by `N` bound
/// durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub matrix: DMatrix<f64>,
    pub samples: u64,
    /// Largest relative error estimate over all entries.
    pub achieved_tolerance: f64,
}

/// `I_ij = N·k_i·k_j ∫₀^∞ exp(-(k_i + k_j)τ) / p(τ) dτ`.
///
/// Every ratio must be strictly positive; drop absent components first.
pub fn fisher_information(
    ratios: &[f64],
    rates: &[f64],
    samples: u64,
    tol: f64,
) -> Result<FisherMatrix> {
    if ratios.len() != rates.len() || rates.is_empty() {
        return Err(domain(
            "ratios and rates must have the same non-zero length",
        ));
    }
    if let Some(i) = ratios.iter().position(|a| !(*a > 0.0)) {
        return Err(domain(format!(
            "ratio {} is zero; drop absent components before computing Fisher information",
            i + 1
        )));
    }
    if !(tol > 0.0) {
        return Err(domain("quadrature tolerance must be positive"));
    }
    let m = rates.len();
    let (min_idx, k_min) =
        rates
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, k)| if k < acc.1 { (i, k) } else { acc },
            );
    let density_at_zero: f64 = ratios.iter().zip(rates).map(|(a, k)| a * k).sum();
    let floor = ratios[min_idx] * k_min;

    let mut matrix = DMatrix::zeros(m, m);
    let mut achieved: f64 = 0.0;
    for i in 0..m {
        for j in i..m {
            // exp(k_min τ) is factored out of numerator and denominator
            let decay = rates[i] + rates[j] - k_min;
            let integrand = |t: f64| {
                let denom: f64 = ratios
                    .iter()
                    .zip(rates)
                    .map(|(a, k)| a * k * (-(k - k_min) * t).exp())
                    .sum();
                (-decay * t).exp() / denom
            };
            // tail beyond `upper` is at most exp(-decay·upper)/(decay·floor),
            // the integral at least 1/(decay·density_at_zero)
            let ratio_bound = density_at_zero / floor;
            let upper = ((ratio_bound / (1e-2 * tol)).ln() / decay).max(1.0 / decay);
            let mut points: Vec<f64> = rates
                .iter()
                .flat_map(|k| [0.5 / k, 2.0 / k, 8.0 / k])
                .filter(|t| *t < upper)
                .collect();
            points.push(0.0);
            points.push(upper);
            points.sort_by(f64::total_cmp);
            points.dedup();
            let q = integrate(integrand, &points, tol, 0.0)?;
            let value = samples as f64 * rates[i] * rates[j] * q.value;
            matrix[(i, j)] = value;
            matrix[(j, i)] = value;
            achieved = achieved.max(q.error / q.value.abs());
        }
    }
    Ok(FisherMatrix {
        matrix,
        samples,
        achieved_tolerance: achieved,
    })
}

/// Cramér–Rao bounds for the ratio and concentration estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrlbReport {
    /// Fisher matrix over the present (non-zero ratio) components.
    pub fisher: FisherMatrix,
    /// Bound on `Var[α̂_i]` for estimators confined to the simplex
    /// (the Fisher inverse restricted to directions with `Σ δα = 0`).
    pub ratio: Vec<f64>,
    /// `(I⁻¹)_ii` with the simplex constraint ignored.
    pub ratio_unconstrained: Vec<f64>,
    /// Concentration bound built from [`Self::ratio`].
    pub concentration: Vec<f64>,
    /// Concentration bound built from [`Self::ratio_unconstrained`].
    pub concentration_unconstrained: Vec<f64>,
}

/// Largest Fisher condition number accepted before declaring the mixture
/// unidentifiable.
pub const FISHER_CONDITION_LIMIT: f64 = 1e14;

/// CRLB vectors for the ratios and the individual concentrations.
///
/// Components with `α_i = 0` are excluded from the Fisher computation and
/// get a zero bound.
pub fn crlb(
    ratios: &[f64],
    rates: &[f64],
    samples: u64,
    total_concentration: f64,
) -> Result<CrlbReport> {
    let present: Vec<usize> = (0..ratios.len()).filter(|i| ratios[*i] > 0.0).collect();
    let sub_ratios: Vec<f64> = present.iter().map(|i| ratios[*i]).collect();
    let sub_rates: Vec<f64> = present.iter().map(|i| rates[*i]).collect();
    let fisher = fisher_information(&sub_ratios, &sub_rates, samples, FISHER_TOLERANCE)?;

    let (inverse, condition) =
        invert_with_condition(&fisher.matrix).map_err(|_| Error::UnidentifiableMixture)?;
    if condition > FISHER_CONDITION_LIMIT {
        return Err(Error::UnidentifiableMixture);
    }
    let k = present.len();
    let basis = sum_zero_basis(k);
    let constrained = if k > 1 {
        let reduced = basis.transpose() * &fisher.matrix * &basis;
        let (reduced_inv, _) =
            invert_with_condition(&reduced).map_err(|_| Error::UnidentifiableMixture)?;
        &basis * reduced_inv * basis.transpose()
    } else {
        DMatrix::zeros(1, 1)
    };

    let scatter = |d: &DMatrix<f64>| {
        let mut out = vec![0.0; ratios.len()];
        for (slot, i) in present.iter().enumerate() {
            out[*i] = d[(slot, slot)];
        }
        out
    };
    let ratio = scatter(&constrained);
    let ratio_unconstrained = scatter(&inverse);
    let concentration = concentration_variance(&ratio, ratios, total_concentration, samples)?;
    let concentration_unconstrained =
        concentration_variance(&ratio_unconstrained, ratios, total_concentration, samples)?;
    Ok(CrlbReport {
        fisher,
        ratio,
        ratio_unconstrained,
        concentration,
        concentration_unconstrained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component_information_is_n() {
        for k in [0.3, 1.0, 625.0] {
            let f = fisher_information(&[1.0], &[k], 10_000, 1e-10).unwrap();
            assert!((f.matrix[(0, 0)] - 10_000.0).abs() / 10_000.0 < 1e-8);
        }
    }

    #[test]
    fn zero_ratio_is_rejected() {
        let err = fisher_information(&[1.0, 0.0], &[2.0, 1.0], 10, 1e-8).unwrap_err();
        assert!(err.to_string().contains("drop absent components"));
    }

    #[test]
    fn matrix_is_symmetric_and_psd() {
        let rates = [625.0, 125.0, 25.0, 5.0, 1.0];
        let f = fisher_information(&[0.2; 5], &rates, 10_000, 1e-8).unwrap();
        let m = &f.matrix;
        assert!((m - m.transpose()).amax() < 1e-10 * m.amax());
        let eig = m.clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|e| *e >= -1e-9 * m.trace()));
        // α'Iα = N·∫p = N
        let a = nalgebra::DVector::from_element(5, 0.2);
        let quad = (a.transpose() * m * &a)[(0, 0)];
        assert!((quad - 10_000.0).abs() < 1e-5);
    }

    #[test]
    fn unconstrained_bound_exceeds_constrained_by_alpha_squared_over_n() {
        let rates = [25.0, 5.0, 1.0];
        let alpha = [0.2, 0.3, 0.5];
        let r = crlb(&alpha, &rates, 1000, 1.0).unwrap();
        for i in 0..3 {
            let gap = r.ratio_unconstrained[i] - r.ratio[i];
            assert!((gap - alpha[i] * alpha[i] / 1000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn absent_components_get_zero_bound() {
        let r = crlb(&[0.5, 0.0, 0.5], &[25.0, 5.0, 1.0], 1000, 1.0).unwrap();
        assert_eq!(r.ratio[1], 0.0);
        assert!(r.ratio[0] > 0.0);
        assert_eq!(r.fisher.matrix.nrows(), 2);
    }
}
