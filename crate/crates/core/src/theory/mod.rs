//! Closed-form error analytics of the estimators: variances, biases, MSEs,
//! Fisher information and Cramér–Rao bounds, the normalized metrics, the
//! unknown-ligand analysis, and the choice of ν.

mod fisher;
mod nu;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use fisher::{
    crlb, fisher_information, CrlbReport, FisherMatrix, FISHER_CONDITION_LIMIT, FISHER_TOLERANCE,
};
pub use nu::{grid_scan_nu, optimize_nu, NuOptimum, NuSearch, NU_SEARCH_RANGE};

use crate::error::{domain, Result};
use crate::estimators::{
    bin_probability_matrix, build_r, build_s, EstimatorKind, FilterBounds, ThresholdScheme,
};
use crate::kinetics::{check_rates, check_ratios};
use crate::linalg::{invert_with_condition, to_vec};

const PROBABILITY_SLACK: f64 = 1e-12;

/// `Var[ĉ_tot] = c_tot² / (N − 2)`.
pub fn var_total_estimator(total_concentration: f64, samples: u64) -> Result<f64> {
    if samples <= 2 {
        return Err(domain(format!(
            "variance is finite only for N > 2, got {samples}"
        )));
    }
    Ok(total_concentration * total_concentration / (samples as f64 - 2.0))
}

/// `E[1/T_u] = k⁺·c_tot / (N − 1)`.
pub fn mean_reciprocal_unbound_time(
    total_concentration: f64,
    binding_rate: f64,
    samples: u64,
) -> Result<f64> {
    if samples <= 1 {
        return Err(domain(format!(
            "the mean of 1/T_u is finite only for N > 1, got {samples}"
        )));
    }
    Ok(binding_rate * total_concentration / (samples as f64 - 1.0))
}

fn check_probabilities(p: &DVector<f64>) -> Result<()> {
    if p.iter()
        .any(|x| !(*x >= -PROBABILITY_SLACK && *x <= 1.0 + PROBABILITY_SLACK))
    {
        return Err(domain("interval probabilities must lie in [0, 1]"));
    }
    if p.sum() > 1.0 + PROBABILITY_SLACK {
        return Err(domain("interval probabilities must not sum above 1"));
    }
    Ok(())
}

/// Covariance of multinomial counts: `N·p_i(1−p_i)` on the diagonal,
/// `−N·p_i·p_j` off it. Mass outside the intervals acts as a dropped
/// category.
pub fn count_covariance(p: &DVector<f64>, samples: u64) -> DMatrix<f64> {
    let n = samples as f64;
    DMatrix::from_fn(p.len(), p.len(), |i, j| {
        if i == j {
            n * p[i] * (1.0 - p[i])
        } else {
            -n * p[i] * p[j]
        }
    })
}

/// `Var[(A·n)_l / N] = (1/N²) Σ_i Σ_j a_li a_lj Cov[n_i, n_j]`.
pub fn linear_ratio_variance(
    weights: &DMatrix<f64>,
    p: &DVector<f64>,
    samples: u64,
) -> Result<Vec<f64>> {
    check_probabilities(p)?;
    let cov = count_covariance(p, samples);
    let n2 = (samples as f64).powi(2);
    Ok((0..weights.nrows())
        .map(|l| {
            let row = weights.row(l);
            (row * &cov * row.transpose())[(0, 0)] / n2
        })
        .collect())
}

/// Variance of the unbiased ratio estimator for true ratios `α`.
pub fn unbiased_ratio_variance(s: &DMatrix<f64>, ratios: &[f64], samples: u64) -> Result<Vec<f64>> {
    let p = s * DVector::from_column_slice(ratios);
    let (w, _) = invert_with_condition(s)?;
    linear_ratio_variance(&w, &p, samples)
}

/// Variance of a product of independent estimators `ĉ = ĉ_tot·α̂`:
/// `Var[ĉ_tot]·Var[α̂] + Var[ĉ_tot]·E[α̂]² + Var[α̂]·c_tot²`.
pub fn concentration_variance(
    ratio_variance: &[f64],
    ratio_mean: &[f64],
    total_concentration: f64,
    samples: u64,
) -> Result<Vec<f64>> {
    if ratio_variance.len() != ratio_mean.len() {
        return Err(domain("ratio variance and mean must have equal length"));
    }
    let var_total = var_total_estimator(total_concentration, samples)?;
    let c2 = total_concentration * total_concentration;
    Ok(ratio_variance
        .iter()
        .zip(ratio_mean)
        .map(|(v, m)| var_total * v + var_total * m * m + v * c2)
        .collect())
}

/// Which scalar summarizes a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `(1/M) Σ MSE_i / c_i²`.
    AverageNmse,
    /// `Σ MSE_i / c_tot²`, defined when some `c_i = 0`.
    TotalNormalizedMse,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::AverageNmse => "average_nmse",
            Metric::TotalNormalizedMse => "total_normalized_mse",
        }
    }

    /// The average NMSE unless some true concentration is zero.
    pub fn for_truth(truth: &[f64]) -> Self {
        if truth.contains(&0.0) {
            Metric::TotalNormalizedMse
        } else {
            Metric::AverageNmse
        }
    }

    /// Applies the metric to per-ligand squared errors.
    pub fn evaluate(
        &self,
        squared_errors: &[f64],
        truth: &[f64],
        total_concentration: f64,
    ) -> Result<f64> {
        match self {
            Metric::AverageNmse => {
                if truth.contains(&0.0) {
                    return Err(domain(
                        "NMSE is undefined for an absent ligand; use the total normalized MSE",
                    ));
                }
                Ok(squared_errors
                    .iter()
                    .zip(truth)
                    .map(|(e, c)| e / (c * c))
                    .sum::<f64>()
                    / truth.len() as f64)
            }
            Metric::TotalNormalizedMse => Ok(
                squared_errors.iter().sum::<f64>() / (total_concentration * total_concentration)
            ),
        }
    }
}

/// Analytic error summary of a concentration estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: EstimatorKind,
    pub total_concentration: f64,
    /// True concentrations of the known ligands.
    pub truth: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub bias: Vec<f64>,
    pub mse: Vec<f64>,
    /// Concentration CRLB, when computed.
    pub crlb: Option<Vec<f64>>,
}

impl ErrorReport {
    /// `MSE_i / c_i²`, or an error for absent ligands.
    pub fn nmse(&self) -> Result<Vec<f64>> {
        if self.truth.contains(&0.0) {
            return Err(domain(
                "NMSE is undefined for an absent ligand; use the total normalized MSE",
            ));
        }
        Ok(self
            .mse
            .iter()
            .zip(&self.truth)
            .map(|(e, c)| e / (c * c))
            .collect())
    }

    pub fn metric(&self, metric: Metric) -> Result<f64> {
        metric.evaluate(&self.mse, &self.truth, self.total_concentration)
    }

    /// The same metric applied to the CRLB vector.
    pub fn crlb_metric(&self, metric: Metric) -> Option<Result<f64>> {
        self.crlb
            .as_ref()
            .map(|c| metric.evaluate(c, &self.truth, self.total_concentration))
    }
}

/// `(1/M) Σ MSE_i / c_i²`.
pub fn average_nmse(report: &ErrorReport) -> Result<f64> {
    report.metric(Metric::AverageNmse)
}

/// `Σ MSE_i / c_tot²`.
pub fn total_normalized_mse(report: &ErrorReport) -> f64 {
    report.mse.iter().sum::<f64>() / report.total_concentration.powi(2)
}

/// Report for a linear ratio estimator `α̂ = A·n/N` when the counts have
/// interval probabilities `p` and the known ligands have true ratios `α`.
pub fn linear_estimator_report(
    kind: EstimatorKind,
    weights: &DMatrix<f64>,
    p: &DVector<f64>,
    ratios: &[f64],
    total_concentration: f64,
    samples: u64,
) -> Result<ErrorReport> {
    let ratio_mean = weights * p;
    let ratio_variance = linear_ratio_variance(weights, p, samples)?;
    let mean_vec = to_vec(&ratio_mean);
    let variance =
        concentration_variance(&ratio_variance, &mean_vec, total_concentration, samples)?;
    let truth: Vec<f64> = ratios.iter().map(|a| a * total_concentration).collect();
    let mean: Vec<f64> = mean_vec.iter().map(|a| a * total_concentration).collect();
    let bias: Vec<f64> = mean.iter().zip(&truth).map(|(m, c)| m - c).collect();
    let mse = variance.iter().zip(&bias).map(|(v, b)| v + b * b).collect();
    Ok(ErrorReport {
        kind,
        total_concentration,
        truth,
        mean,
        variance,
        bias,
        mse,
        crlb: None,
    })
}

/// Report of the unbiased estimator when every ligand is known.
pub fn unbiased_estimator_analytics(
    s: &DMatrix<f64>,
    ratios: &[f64],
    total_concentration: f64,
    samples: u64,
) -> Result<ErrorReport> {
    let (w, _) = invert_with_condition(s)?;
    let p = s * DVector::from_column_slice(ratios);
    linear_estimator_report(
        EstimatorKind::Unbiased,
        &w,
        &p,
        ratios,
        total_concentration,
        samples,
    )
}

/// Report of the simplified biased estimator: mean `R·p`, bias `(R−W)·p`.
pub fn biased_estimator_analytics(
    s: &DMatrix<f64>,
    h: &DMatrix<f64>,
    ratios: &[f64],
    total_concentration: f64,
    samples: u64,
) -> Result<ErrorReport> {
    let r = h
        .solve_upper_triangular(&DMatrix::identity(h.nrows(), h.ncols()))
        .ok_or_else(|| domain("H must be invertible"))?;
    let p = s * DVector::from_column_slice(ratios);
    linear_estimator_report(
        EstimatorKind::Biased,
        &r,
        &p,
        ratios,
        total_concentration,
        samples,
    )
}

/// A ligand type present in the channel but not hardwired in the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnknownLigand {
    pub rate: f64,
    pub ratio: f64,
}

/// Report for a receiver built for `known_rates` when unknown ligands are
/// also present. `known_ratios` and the unknown ratios together sum to 1;
/// `c_tot` counts every ligand.
pub fn unknown_ligand_analytics(
    kind: EstimatorKind,
    known_rates: &[f64],
    known_ratios: &[f64],
    unknown: &[UnknownLigand],
    scheme: &ThresholdScheme,
    total_concentration: f64,
    samples: u64,
) -> Result<ErrorReport> {
    let mut all_rates = known_rates.to_vec();
    let mut all_ratios = known_ratios.to_vec();
    for u in unknown {
        if !(u.rate > 0.0) || !(u.ratio >= 0.0) {
            return Err(domain(
                "unknown ligands need a positive rate and non-negative ratio",
            ));
        }
        all_rates.push(u.rate);
        all_ratios.push(u.ratio);
    }
    if all_ratios.iter().any(|a| *a < 0.0) {
        return Err(domain("ratios must be non-negative"));
    }
    let sum: f64 = all_ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(domain(format!(
            "known and unknown ratios must sum to 1, got {sum}"
        )));
    }
    let s_r = bin_probability_matrix(scheme, &all_rates);
    let p = s_r * DVector::from_column_slice(&all_ratios);
    let weights = match kind {
        EstimatorKind::Unbiased => build_s(scheme, known_rates)?.w,
        EstimatorKind::Biased => build_r(scheme, known_rates)?.r,
        other => {
            return Err(domain(format!(
                "no analytic report for the {} estimator",
                other.as_str()
            )))
        }
    };
    linear_estimator_report(
        kind,
        &weights,
        &p,
        known_ratios,
        total_concentration,
        samples,
    )
}

/// A receiver configuration and channel for analytic evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticScenario {
    /// Known (hardwired) unbinding rates, decreasing.
    pub rates: Vec<f64>,
    /// True ratios of the known ligands; zeros mark absent ligands.
    pub ratios: Vec<f64>,
    pub unknown: Vec<UnknownLigand>,
    pub samples: u64,
    pub total_concentration: f64,
    /// `T_0 = T_1/f`, `T_M = f·T_{M-1}` when set.
    pub filter_factor: Option<f64>,
}

impl AnalyticScenario {
    pub fn new(rates: Vec<f64>, ratios: Vec<f64>, samples: u64) -> Result<Self> {
        let s = Self {
            rates,
            ratios,
            unknown: Vec::new(),
            samples,
            total_concentration: 1.0,
            filter_factor: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_rates(&self.rates)?;
        if self.unknown.is_empty() {
            check_ratios(&self.ratios, self.rates.len())?;
        }
        if self.samples <= 2 {
            return Err(domain("at least 3 samples are required"));
        }
        if !(self.total_concentration > 0.0) {
            return Err(domain("total concentration must be positive"));
        }
        Ok(())
    }

    /// Thresholds for a given ν, including the filter if configured.
    pub fn scheme(&self, nu: f64) -> Result<ThresholdScheme> {
        let scheme = ThresholdScheme::from_rates(&self.rates, nu)?;
        match self.filter_factor {
            Some(f) => scheme.with_filter(FilterBounds::around(&scheme, f)?),
            None => Ok(scheme),
        }
    }

    /// The metric appropriate for this scenario's truth.
    pub fn metric(&self) -> Metric {
        Metric::for_truth(&self.ratios)
    }

    /// Analytic report of one estimator at a given ν.
    pub fn report(&self, kind: EstimatorKind, nu: f64) -> Result<ErrorReport> {
        let scheme = self.scheme(nu)?;
        unknown_ligand_analytics(
            kind,
            &self.rates,
            &self.ratios,
            &self.unknown,
            &scheme,
            self.total_concentration,
            self.samples,
        )
    }

    /// Concentration CRLB of the known ligands; `None` when unknown
    /// ligands are present, since the bound assumes a correct model.
    pub fn crlb(&self) -> Result<Option<CrlbReport>> {
        if !self.unknown.is_empty() {
            return Ok(None);
        }
        crlb(
            &self.ratios,
            &self.rates,
            self.samples,
            self.total_concentration,
        )
        .map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::triangular_approximation;

    fn defaults(m: usize) -> (Vec<f64>, Vec<f64>) {
        let rates = crate::kinetics::similarity_rates(m, 5.0, 1.0).unwrap();
        (rates, vec![1.0 / m as f64; m])
    }

    #[test]
    fn total_estimator_variance() {
        assert_eq!(var_total_estimator(1.0, 3).unwrap(), 1.0);
        assert_eq!(var_total_estimator(2.0, 3).unwrap(), 4.0);
        assert!(var_total_estimator(1.0, 2).is_err());
    }

    #[test]
    fn reciprocal_unbound_time_mean() {
        assert_eq!(mean_reciprocal_unbound_time(1.0, 1.0, 2).unwrap(), 1.0);
        assert!(mean_reciprocal_unbound_time(1.0, 1.0, 1).is_err());
        let big = mean_reciprocal_unbound_time(1.0, 1.0, 1_000_000).unwrap();
        assert!((big * 1e6 - 1.0).abs() < 2e-6);
    }

    #[test]
    fn single_ligand_ratio_variance_is_zero() {
        let s = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(unbiased_ratio_variance(&s, &[1.0], 100).unwrap(), vec![0.0]);
    }

    #[test]
    fn ratio_variance_scales_inverse_n() {
        let (rates, alpha) = defaults(4);
        let s = bin_probability_matrix(&ThresholdScheme::from_rates(&rates, 3.0).unwrap(), &rates);
        let v1 = unbiased_ratio_variance(&s, &alpha, 1000).unwrap();
        let v2 = unbiased_ratio_variance(&s, &alpha, 10_000).unwrap();
        for (a, b) in v1.iter().zip(&v2) {
            assert!((a / b - 10.0).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let w = DMatrix::identity(2, 2);
        assert!(linear_ratio_variance(&w, &DVector::from_vec(vec![0.7, 0.6]), 10).is_err());
        assert!(linear_ratio_variance(&w, &DVector::from_vec(vec![-0.1, 0.6]), 10).is_err());
    }

    #[test]
    fn concentration_variance_degenerate_cases() {
        let v = concentration_variance(&[0.0, 0.0], &[0.25, 0.75], 2.0, 12).unwrap();
        let vt = 4.0 / 10.0;
        assert!((v[0] - vt * 0.0625).abs() < 1e-15);
        assert!((v[1] - vt * 0.5625).abs() < 1e-15);
        // Var[ĉ_tot] → 0 as N → ∞ leaves Var[α̂]·c_tot²
        let v = concentration_variance(&[0.01], &[1.0], 2.0, u64::MAX).unwrap();
        assert!((v[0] - 0.04).abs() < 1e-12);
    }

    #[test]
    fn mse_decomposition_and_scale_freeness() {
        let (rates, alpha) = defaults(5);
        let sc = ThresholdScheme::from_rates(&rates, 5.0).unwrap();
        let s = bin_probability_matrix(&sc, &rates);
        let h = triangular_approximation(&sc, &rates);
        let r1 = biased_estimator_analytics(&s, &h, &alpha, 1.0, 10_000).unwrap();
        let r10 = biased_estimator_analytics(&s, &h, &alpha, 10.0, 10_000).unwrap();
        for i in 0..5 {
            let lhs = r1.mse[i];
            let rhs = r1.variance[i] + r1.bias[i].powi(2);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs);
        }
        let a = average_nmse(&r1).unwrap();
        let b = average_nmse(&r10).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
        assert!((a - r1.nmse().unwrap().iter().sum::<f64>() / 5.0).abs() < 1e-15);
    }

    #[test]
    fn exact_triangular_model_is_unbiased() {
        let tri = DMatrix::from_row_slice(2, 2, &[0.9, 0.3, 0.0, 0.7]);
        let r = biased_estimator_analytics(&tri, &tri, &[0.4, 0.6], 1.0, 100).unwrap();
        assert!(r.bias.iter().all(|b| b.abs() < 1e-15));
    }

    #[test]
    fn bias_vanishes_as_nu_grows() {
        let (rates, alpha) = defaults(3);
        let mut last = f64::INFINITY;
        for nu in [5.0, 10.0, 20.0, 40.0] {
            let sc = ThresholdScheme::from_rates(&rates, nu).unwrap();
            let s = bin_probability_matrix(&sc, &rates);
            let h = triangular_approximation(&sc, &rates);
            let r = biased_estimator_analytics(&s, &h, &alpha, 1.0, 10_000).unwrap();
            let worst = r.bias.iter().map(|b| b.abs()).fold(0.0, f64::max);
            assert!(worst < last);
            last = worst;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn metrics() {
        let report = ErrorReport {
            kind: EstimatorKind::Unbiased,
            total_concentration: 1.0,
            truth: vec![0.5, 0.5],
            mean: vec![0.5, 0.5],
            variance: vec![0.0, 0.0],
            bias: vec![0.0, 0.0],
            mse: vec![0.0, 0.0],
            crlb: None,
        };
        assert_eq!(average_nmse(&report).unwrap(), 0.0);
        let r2 = ErrorReport {
            mse: vec![0.25 * 0.1, 0.25 * 0.3],
            ..report.clone()
        };
        assert!((average_nmse(&r2).unwrap() - 0.2).abs() < 1e-15);
        let absent = ErrorReport {
            truth: vec![1.0, 0.0],
            ..r2.clone()
        };
        assert!(average_nmse(&absent).is_err());
        assert!((total_normalized_mse(&absent) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn degenerate_unknown_reduces_to_known() {
        let (rates, alpha) = defaults(5);
        let sc = ThresholdScheme::from_rates(&rates, 3.0).unwrap();
        let s = bin_probability_matrix(&sc, &rates);
        let known = unbiased_estimator_analytics(&s, &alpha, 1.0, 10_000).unwrap();
        let with = unknown_ligand_analytics(
            EstimatorKind::Unbiased,
            &rates,
            &alpha,
            &[UnknownLigand {
                rate: 100.0,
                ratio: 0.0,
            }],
            &sc,
            1.0,
            10_000,
        )
        .unwrap();
        for i in 0..5 {
            assert!((known.mse[i] - with.mse[i]).abs() < 1e-15);
            assert!(with.bias[i].abs() < 1e-13);
        }
    }
}
