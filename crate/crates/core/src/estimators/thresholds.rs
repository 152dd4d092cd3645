use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kinetics::check_rates;

/// Default proportionality constant for the unbiased estimator and the CRLB.
pub const DEFAULT_NU_UNBIASED: f64 = 3.0;
/// Default proportionality constant for the simplified biased estimator.
pub const DEFAULT_NU_BIASED: f64 = 5.0;

/// Time thresholds `T_0 ≤ T_1 < … < T_{M-1} ≤ T_M` splitting bound dwell
/// times into `M` intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScheme {
    nu: f64,
    thresholds: Vec<f64>,
}

/// Finite outer thresholds used to discard very short and very long
/// binding events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ThresholdScheme {
    /// `T_i = ν / k⁻_i` for the interior thresholds, `T_0 = 0`, `T_M = ∞`.
    pub fn from_rates(rates: &[f64], nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(domain(format!("ν must be positive, got {nu}")));
        }
        check_rates(rates)?;
        let m = rates.len();
        let mut thresholds = Vec::with_capacity(m + 1);
        thresholds.push(0.0);
        thresholds.extend(rates[..m - 1].iter().map(|k| nu / k));
        thresholds.push(f64::INFINITY);
        if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Internal("thresholds are not increasing".into()));
        }
        Ok(Self { nu, thresholds })
    }

    /// A scheme from explicit thresholds `T_0..=T_M`.
    pub fn from_thresholds(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() < 2 {
            return Err(domain("a scheme needs at least T_0 and T_1"));
        }
        if !(thresholds[0] >= 0.0) {
            return Err(domain("T_0 must be non-negative"));
        }
        if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("thresholds must be strictly increasing"));
        }
        let m = thresholds.len() - 1;
        if thresholds[..m].iter().any(|t| !t.is_finite()) {
            return Err(domain("only T_M may be infinite"));
        }
        Ok(Self {
            nu: f64::NAN,
            thresholds,
        })
    }

    /// Replaces `T_0` and `T_M` with finite filtering bounds.
    pub fn with_filter(&self, filter: FilterBounds) -> Result<Self> {
        let m = self.intervals();
        let mut thresholds = self.thresholds.clone();
        thresholds[0] = filter.lower;
        thresholds[m] = filter.upper;
        if !(filter.lower >= 0.0) || !(filter.upper > filter.lower) {
            return Err(domain("filter bounds must satisfy 0 ≤ lower < upper"));
        }
        if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain(format!(
                "filter bounds ({}, {}) must enclose the interior thresholds {:?}",
                filter.lower,
                filter.upper,
                &self.thresholds[1..m]
            )));
        }
        Ok(Self {
            nu: self.nu,
            thresholds,
        })
    }

    /// Proportionality constant, NaN for explicitly built schemes.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `[T_0, T_1, …, T_M]`.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.thresholds.len() - 1
    }

    pub fn is_filtered(&self) -> bool {
        self.thresholds[0] > 0.0 || self.thresholds[self.intervals()].is_finite()
    }

    /// Index of the interval `[T_{i-1}, T_i)` holding `tau`, if retained.
    pub fn bin_of(&self, tau: f64) -> Option<usize> {
        let t = &self.thresholds;
        if tau < t[0] || tau >= t[t.len() - 1] {
            return None;
        }
        Some(t[1..].partition_point(|x| *x <= tau))
    }
}

impl FilterBounds {
    /// `T_0 = T_1 / factor` and `T_M = factor·T_{M-1}`, built around an
    /// unfiltered scheme with at least one interior threshold.
    pub fn around(scheme: &ThresholdScheme, factor: f64) -> Result<Self> {
        let m = scheme.intervals();
        if m < 2 {
            return Err(domain("relative filtering needs at least two intervals"));
        }
        if !(factor > 1.0) {
            return Err(domain("filter factor must exceed 1"));
        }
        let t = scheme.thresholds();
        Ok(Self {
            lower: t[1] / factor,
            upper: t[m - 1] * factor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ligand_scheme() {
        let s = ThresholdScheme::from_rates(&[3.0], 3.0).unwrap();
        assert_eq!(s.thresholds(), &[0.0, f64::INFINITY]);
        assert_eq!(s.bin_of(1e9), Some(0));
    }

    #[test]
    fn interior_threshold() {
        let s = ThresholdScheme::from_rates(&[5.0, 1.0], 3.0).unwrap();
        assert!((s.thresholds()[1] - 0.6).abs() < 1e-15);
        assert!(ThresholdScheme::from_rates(&[5.0, 1.0], 0.0).is_err());
        assert!(ThresholdScheme::from_rates(&[1.0, 5.0], 3.0).is_err());
    }

    #[test]
    fn filter_lower_bound_for_defaults() {
        let rates = [625.0, 125.0, 25.0, 5.0, 1.0];
        let s = ThresholdScheme::from_rates(&rates, 3.0).unwrap();
        let f = FilterBounds::around(&s, 5.0).unwrap();
        assert!((f.lower - 960e-6).abs() < 1e-15);
        let filtered = s.with_filter(f).unwrap();
        assert_eq!(filtered.bin_of(500e-6), None);
        assert_eq!(filtered.bin_of(1e-3), Some(0));
        // an upper bound below T_{M-1} = 0.6 s is not a valid scheme
        assert!(s
            .with_filter(FilterBounds {
                lower: 960e-6,
                upper: 0.12
            })
            .is_err());
    }

    #[test]
    fn binning_uses_half_open_intervals() {
        let s = ThresholdScheme::from_thresholds(vec![0.0, 1.0, 2.0, f64::INFINITY]).unwrap();
        assert_eq!(s.bin_of(0.0), Some(0));
        assert_eq!(s.bin_of(0.999), Some(0));
        assert_eq!(s.bin_of(1.0), Some(1));
        assert_eq!(s.bin_of(2.0), Some(2));
        assert!(ThresholdScheme::from_thresholds(vec![0.0, 1.0, 1.0]).is_err());
    }
}
