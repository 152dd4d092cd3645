//! Threshold schemes, estimator matrices and the concentration estimators.
//!
//! The total concentration comes from the total unbound time; the ratios
//! come from counting bound durations per threshold interval and inverting
//! the expected-count relation `E[n] = N·S·α` (unbiased, `W = S⁻¹`) or its
//! upper-triangular approximation (biased, `R = H⁻¹`).

mod em;
mod matrices;
mod thresholds;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use em::{ml_ratio_oracle, EmOutcome};
pub use matrices::{
    bin_probability_matrix, build_r, build_s, triangular_approximation,
    triangular_inverse_recursive, BiasedWeights, EstimatorMatrices, UnbiasedWeights,
    BIASED_NU_WARNING,
};
pub use thresholds::{FilterBounds, ThresholdScheme, DEFAULT_NU_BIASED, DEFAULT_NU_UNBIASED};

use crate::error::{domain, Error, Result};
use crate::kinetics::ObservationSet;

/// Which ratio estimator produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Method of moments with `W = S⁻¹`.
    Unbiased,
    /// Method of moments with the triangular `R = H⁻¹`.
    Biased,
    /// Maximum likelihood via EM on the raw bound durations.
    MlOracle,
    /// Chemical reaction network readout of the unbiased estimator.
    Crn,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Unbiased => "unbiased",
            EstimatorKind::Biased => "biased",
            EstimatorKind::MlOracle => "ml_oracle",
            EstimatorKind::Crn => "crn",
        }
    }
}

/// Per-interval event counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinCounts {
    pub counts: Vec<u64>,
    /// Events inside `[T_0, T_M)`.
    pub retained: u64,
    /// All events, retained or not.
    pub total: u64,
}

/// `n_i = #{τ_b ∈ [T_{i-1}, T_i)}`; events outside `[T_0, T_M)` are dropped.
pub fn bin_counts(obs: &ObservationSet, scheme: &ThresholdScheme) -> BinCounts {
    let mut counts = vec![0u64; scheme.intervals()];
    for tau in &obs.bound_durations {
        if let Some(i) = scheme.bin_of(*tau) {
            counts[i] += 1;
        }
    }
    let retained = counts.iter().sum();
    BinCounts {
        counts,
        retained,
        total: obs.samples() as u64,
    }
}

/// `ĉ_tot = (N − 1) / (k⁺·T_u)`, unbiased for `N > 1`.
pub fn estimate_total_concentration(
    total_unbound_time: f64,
    samples: usize,
    binding_rate: f64,
) -> Result<f64> {
    if samples < 2 {
        return Err(domain(format!(
            "at least 2 samples are required, got {samples}"
        )));
    }
    if !(total_unbound_time > 0.0) {
        return Err(domain("total unbound time must be positive"));
    }
    if !(binding_rate > 0.0) {
        return Err(domain("binding rate must be positive"));
    }
    Ok((samples as f64 - 1.0) / (binding_rate * total_unbound_time))
}

fn check_counts(counts: &[u64], events: u64, dim: usize) -> Result<()> {
    if counts.len() != dim {
        return Err(domain(format!(
            "expected {dim} counts, got {}",
            counts.len()
        )));
    }
    if counts.iter().sum::<u64>() == 0 || events == 0 {
        return Err(Error::NoEventsRetained);
    }
    Ok(())
}

/// `α̂ = W·n / N`, where `N` counts every binding event (filtered or not).
///
/// The result is not projected onto the simplex.
pub fn estimate_ratios_unbiased(counts: &[u64], events: u64, w: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_counts(counts, events, w.ncols())?;
    let n = events as f64;
    Ok((0..w.nrows())
        .map(|l| {
            counts
                .iter()
                .enumerate()
                .map(|(i, c)| w[(l, i)] * *c as f64)
                .sum::<f64>()
                / n
        })
        .collect())
}

/// `α̂*_l = (1/N)·Σ_{i=l}^{M} r_{l,i}·n_i`; only counts at or above interval
/// `l` are touched.
pub fn estimate_ratios_biased(counts: &[u64], events: u64, r: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_counts(counts, events, r.ncols())?;
    let m = r.ncols();
    let n = events as f64;
    Ok((0..m)
        .map(|l| (l..m).map(|i| r[(l, i)] * counts[i] as f64).sum::<f64>() / n)
        .collect())
}

/// Combined estimate `ĉ = ĉ_tot·α̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationEstimate {
    pub kind: EstimatorKind,
    pub total: f64,
    pub ratios: Vec<f64>,
    pub concentrations: Vec<f64>,
    /// Samples used for the total concentration.
    pub samples: u64,
    /// Binding events retained by the threshold filter.
    pub retained: u64,
}

impl ConcentrationEstimate {
    pub fn new(
        kind: EstimatorKind,
        total: f64,
        ratios: Vec<f64>,
        samples: u64,
        retained: u64,
    ) -> Self {
        let concentrations = ratios.iter().map(|a| a * total).collect();
        Self {
            kind,
            total,
            ratios,
            concentrations,
            samples,
            retained,
        }
    }

    /// Clips negative ratios to zero and renormalizes. This breaks the
    /// unbiasedness of the moment estimators.
    pub fn clipped_to_simplex(&self) -> Self {
        let clipped: Vec<f64> = self.ratios.iter().map(|a| a.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        let ratios = if sum > 0.0 {
            clipped.iter().map(|a| a / sum).collect()
        } else {
            vec![1.0 / clipped.len() as f64; clipped.len()]
        };
        Self::new(self.kind, self.total, ratios, self.samples, self.retained)
    }
}

/// Estimate from sufficient statistics already binned by `matrices.scheme`.
pub fn estimate_from_counts(
    kind: EstimatorKind,
    total_unbound_time: f64,
    samples: u64,
    counts: &[u64],
    matrices: &EstimatorMatrices,
    binding_rate: f64,
) -> Result<ConcentrationEstimate> {
    let total = estimate_total_concentration(total_unbound_time, samples as usize, binding_rate)?;
    let ratios = match kind {
        EstimatorKind::Unbiased | EstimatorKind::Crn => {
            estimate_ratios_unbiased(counts, samples, &matrices.w)?
        }
        EstimatorKind::Biased => estimate_ratios_biased(counts, samples, &matrices.r)?,
        EstimatorKind::MlOracle => {
            return Err(domain(
                "the ML oracle needs raw bound durations, not counts",
            ))
        }
    };
    Ok(ConcentrationEstimate::new(
        kind,
        total,
        ratios,
        samples,
        counts.iter().sum(),
    ))
}

/// EM tolerance and iteration cap used by [`estimate_concentrations`].
pub const ML_ORACLE_TOLERANCE: f64 = 1e-9;
pub const ML_ORACLE_MAX_ITER: usize = 100_000;

/// Runs one estimator on an observation set.
pub fn estimate_concentrations(
    kind: EstimatorKind,
    obs: &ObservationSet,
    matrices: &EstimatorMatrices,
    binding_rate: f64,
) -> Result<ConcentrationEstimate> {
    let samples = obs.samples() as u64;
    match kind {
        EstimatorKind::MlOracle => {
            let total =
                estimate_total_concentration(obs.total_unbound_time, obs.samples(), binding_rate)?;
            let em = ml_ratio_oracle(
                &obs.bound_durations,
                &matrices.rates,
                ML_ORACLE_TOLERANCE,
                ML_ORACLE_MAX_ITER,
            )?;
            Ok(ConcentrationEstimate::new(
                kind, total, em.ratios, samples, samples,
            ))
        }
        _ => {
            let binned = bin_counts(obs, &matrices.scheme);
            estimate_from_counts(
                kind,
                obs.total_unbound_time,
                samples,
                &binned.counts,
                matrices,
                binding_rate,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrices(rates: &[f64], nu: f64) -> EstimatorMatrices {
        EstimatorMatrices::new(&ThresholdScheme::from_rates(rates, nu).unwrap(), rates).unwrap()
    }

    #[test]
    fn total_concentration_arithmetic() {
        assert_eq!(estimate_total_concentration(1.0, 2, 1.0).unwrap(), 1.0);
        assert!(estimate_total_concentration(1.0, 1, 1.0).is_err());
        assert!(estimate_total_concentration(0.0, 10, 1.0).is_err());
    }

    #[test]
    fn single_ligand_ratio_is_one() {
        let m = matrices(&[3.0], 3.0);
        assert_eq!(
            estimate_ratios_unbiased(&[17], 17, &m.w).unwrap(),
            vec![1.0]
        );
        assert_eq!(estimate_ratios_biased(&[17], 17, &m.r).unwrap(), vec![1.0]);
    }

    #[test]
    fn expected_counts_are_a_fixed_point() {
        let rates = [125.0, 25.0, 5.0, 1.0];
        let m = matrices(&rates, 3.0);
        let alpha = [0.1, 0.2, 0.3, 0.4];
        // choose N so that N·S·α is integral to within rounding
        let n = 1e12;
        let p = &m.s * nalgebra::DVector::from_column_slice(&alpha);
        let counts: Vec<u64> = p.iter().map(|x| (x * n).round() as u64).collect();
        let est = estimate_ratios_unbiased(&counts, n as u64, &m.w).unwrap();
        for (a, b) in est.iter().zip(alpha) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn highest_affinity_biased_ratio_uses_only_last_count() {
        let rates = [25.0, 5.0, 1.0];
        let m = matrices(&rates, 5.0);
        let a = estimate_ratios_biased(&[100, 50, 20], 170, &m.r).unwrap();
        let b = estimate_ratios_biased(&[9_000, 1, 20], 170, &m.r).unwrap();
        assert_eq!(a[2], b[2]);
        assert_eq!(a[2], 20.0 * m.r[(2, 2)] / 170.0);
    }

    #[test]
    fn empty_counts_error() {
        let m = matrices(&[5.0, 1.0], 3.0);
        assert_eq!(
            estimate_ratios_unbiased(&[0, 0], 10, &m.w),
            Err(Error::NoEventsRetained)
        );
    }

    #[test]
    fn clipping_lands_on_simplex() {
        let e =
            ConcentrationEstimate::new(EstimatorKind::Unbiased, 2.0, vec![-0.1, 0.6, 0.5], 10, 10);
        let c = e.clipped_to_simplex();
        assert!(c.ratios.iter().all(|a| *a >= 0.0));
        assert!((c.ratios.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((c.concentrations[1] - 2.0 * 0.6 / 1.1).abs() < 1e-15);
    }
}
