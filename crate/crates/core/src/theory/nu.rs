use serde::{Deserialize, Serialize};

use super::AnalyticScenario;
use crate::error::{domain, Result};
use crate::estimators::EstimatorKind;

/// Default search interval for ν.
pub const NU_SEARCH_RANGE: (f64, f64) = (0.2, 10.0);
const GOLDEN_TOLERANCE: f64 = 1e-3;
const GRID_POINTS: usize = 200;
const PROBE_POINTS: usize = 9;

/// How the optimum was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuSearch {
    GoldenSection,
    /// The bracket looked multimodal and a grid scan was used instead.
    GridFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuOptimum {
    pub nu: f64,
    pub objective: f64,
    pub method: NuSearch,
}

fn objective(scenario: &AnalyticScenario, nu: f64) -> f64 {
    scenario
        .report(EstimatorKind::Unbiased, nu)
        .and_then(|r| r.metric(scenario.metric()))
        .unwrap_or(f64::INFINITY)
}

fn check_range(range: (f64, f64)) -> Result<()> {
    if !(range.0 > 0.0 && range.1 > range.0 && range.1.is_finite()) {
        return Err(domain(format!(
            "invalid ν range ({}, {})",
            range.0, range.1
        )));
    }
    Ok(())
}

/// Evaluates the analytic unbiased metric on `points` evenly spaced ν
/// values and returns the best one.
pub fn grid_scan_nu(
    scenario: &AnalyticScenario,
    range: (f64, f64),
    points: usize,
) -> Result<NuOptimum> {
    check_range(range)?;
    if points < 2 {
        return Err(domain("a grid scan needs at least 2 points"));
    }
    let step = (range.1 - range.0) / (points - 1) as f64;
    let (nu, value) = (0..points)
        .map(|i| {
            let nu = range.0 + step * i as f64;
            (nu, objective(scenario, nu))
        })
        .fold((f64::NAN, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        });
    if !value.is_finite() {
        return Err(domain("the objective is not finite anywhere on the ν grid"));
    }
    Ok(NuOptimum {
        nu,
        objective: value,
        method: NuSearch::GridFallback,
    })
}

/// Minimizes the analytic average NMSE of the unbiased estimator over ν by
/// golden-section search, falling back to a grid scan when a coarse probe
/// finds a better point than the golden-section result.
pub fn optimize_nu(scenario: &AnalyticScenario, range: (f64, f64)) -> Result<NuOptimum> {
    check_range(range)?;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = range;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(scenario, c);
    let mut fd = objective(scenario, d);
    while b - a > GOLDEN_TOLERANCE {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(scenario, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(scenario, d);
        }
    }
    let nu = 0.5 * (a + b);
    let best = objective(scenario, nu);

    let step = (range.1 - range.0) / (PROBE_POINTS - 1) as f64;
    let probe_beats = (0..PROBE_POINTS)
        .map(|i| objective(scenario, range.0 + step * i as f64))
        .any(|v| v < best * (1.0 - 1e-9));
    if !best.is_finite() || probe_beats {
        log::warn!("ν objective looks multimodal; using a {GRID_POINTS}-point grid");
        return grid_scan_nu(scenario, range, GRID_POINTS);
    }
    Ok(NuOptimum {
        nu,
        objective: best,
        method: NuSearch::GoldenSection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::similarity_rates;

    fn defaults() -> AnalyticScenario {
        AnalyticScenario::new(similarity_rates(5, 5.0, 1.0).unwrap(), vec![0.2; 5], 10_000).unwrap()
    }

    #[test]
    fn default_optimum_near_three() {
        let sc = defaults();
        let opt = optimize_nu(&sc, NU_SEARCH_RANGE).unwrap();
        assert_eq!(opt.method, NuSearch::GoldenSection);
        assert!((2.0..=4.0).contains(&opt.nu), "{}", opt.nu);
        assert!(opt.objective <= objective(&sc, 3.0));
        assert!(opt.objective <= objective(&sc, 5.0));
        let grid = grid_scan_nu(&sc, NU_SEARCH_RANGE, 200).unwrap();
        assert!((grid.nu - opt.nu).abs() < 1e-2);
    }

    #[test]
    fn bad_range() {
        assert!(optimize_nu(&defaults(), (0.0, 1.0)).is_err());
        assert!(optimize_nu(&defaults(), (2.0, 1.0)).is_err());
    }
}
