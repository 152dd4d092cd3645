use serde::{Deserialize, Serialize};

use super::config::{RatioKind, ScenarioConfig, SweepEstimator};
use super::montecarlo::{monte_carlo, McTarget};
use crate::error::{config, Result};
use crate::estimators::{EstimatorKind, EstimatorMatrices};
use crate::rng::derive_seed;
use crate::theory::{optimize_nu, UnknownLigand, NU_SEARCH_RANGE};

/// Default unknown ligand added when a sweep touches only one of its
/// parameters.
pub const DEFAULT_UNKNOWN: UnknownLigand = UnknownLigand {
    rate: 100.0,
    ratio: 0.1,
};

/// A configuration parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// Number of ligand types.
    M,
    Chi,
    /// Samples per estimate.
    N,
    /// Ratio of the highest-affinity ligand.
    AlphaM,
    /// 1-based index of a single absent ligand, 0 for none.
    Absent,
    /// Unbinding rate of the unknown ligand.
    KU,
    /// Ratio of the unknown ligand.
    AlphaU,
}

impl SweepVar {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "M" | "m" => SweepVar::M,
            "chi" => SweepVar::Chi,
            "N" | "n" => SweepVar::N,
            "alpha_m" | "alpha_M" => SweepVar::AlphaM,
            "absent" => SweepVar::Absent,
            "k_u" => SweepVar::KU,
            "alpha_u" => SweepVar::AlphaU,
            _ => return Err(config("var", format!("unknown sweep variable '{s}'"))),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVar::M => "M",
            SweepVar::Chi => "chi",
            SweepVar::N => "N",
            SweepVar::AlphaM => "alpha_m",
            SweepVar::Absent => "absent",
            SweepVar::KU => "k_u",
            SweepVar::AlphaU => "alpha_u",
        }
    }

    fn integral(&self) -> bool {
        matches!(self, SweepVar::M | SweepVar::N | SweepVar::Absent)
    }

    fn logarithmic(&self) -> bool {
        matches!(self, SweepVar::N | SweepVar::KU)
    }

    /// Axis ranges of the standard figures.
    pub fn default_range(&self) -> (f64, f64) {
        match self {
            SweepVar::M => (2.0, 10.0),
            SweepVar::Chi => (1.5, 10.0),
            SweepVar::N => (1e2, 1e5),
            SweepVar::AlphaM => (0.05, 0.95),
            SweepVar::Absent => (0.0, 5.0),
            SweepVar::KU => (1e-1, 1e5),
            SweepVar::AlphaU => (0.0, 0.5),
        }
    }
}

/// Grid of values for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl Sweep {
    /// `points` values from `from` to `to`; log-spaced for `N` and `k_u`.
    /// Integer variables default to unit steps.
    pub fn range(var: SweepVar, from: f64, to: f64, points: Option<usize>) -> Result<Self> {
        if !(from.is_finite() && to.is_finite() && to >= from) {
            return Err(config("from", format!("invalid range {from}..{to}")));
        }
        let points = match points {
            Some(p) => p,
            None if var.integral() && !var.logarithmic() => (to - from).round() as usize + 1,
            None => 10,
        };
        if points == 0 {
            return Err(config("points", "at least one point is required"));
        }
        let values = (0..points)
            .map(|i| {
                let f = if points == 1 {
                    0.0
                } else {
                    i as f64 / (points - 1) as f64
                };
                let v = if var.logarithmic() {
                    if !(from > 0.0) {
                        return Err(config("from", "log-spaced sweeps need a positive start"));
                    }
                    (from.ln() + f * (to.ln() - from.ln())).exp()
                } else {
                    from + f * (to - from)
                };
                Ok(if var.integral() { v.round() } else { v })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { var, values })
    }

    pub fn default_for(var: SweepVar) -> Self {
        let (a, b) = var.default_range();
        Self::range(var, a, b, None).expect("default ranges are valid")
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub var: f64,
    pub estimator: SweepEstimator,
    pub analytic: f64,
    /// NaN when no trials were run.
    pub mc: f64,
    pub mc_se: f64,
    /// NaN when unknown ligands make the bound inapplicable.
    pub crlb: f64,
    pub nu: f64,
}

/// CSV header of sweep tables.
pub const SWEEP_HEADER: [&str; 6] = ["var", "estimator", "analytic", "mc", "mc_se", "crlb"];

fn as_count(field: &str, v: f64) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
        return Err(config(
            field,
            format!("expected a non-negative integer, got {v}"),
        ));
    }
    Ok(v as usize)
}

/// `cfg` with one variable set to `value`.
pub fn apply(cfg: &ScenarioConfig, var: SweepVar, value: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    match var {
        SweepVar::M => c.model.ligand_types = as_count("M", value)?,
        SweepVar::Chi => c.model.chi = value,
        SweepVar::N => c.model.samples = as_count("N", value)? as u64,
        SweepVar::AlphaM => {
            c.ratios.kind = RatioKind::HighestAffinity;
            c.ratios.weight = Some(value);
        }
        SweepVar::Absent => {
            let i = as_count("absent", value)?;
            c.ratios.absent = if i == 0 { vec![] } else { vec![i] };
        }
        SweepVar::KU | SweepVar::AlphaU => {
            if c.unknown.is_empty() {
                c.unknown.push(DEFAULT_UNKNOWN);
            }
            if var == SweepVar::KU {
                c.unknown[0].rate = value;
            } else {
                c.unknown[0].ratio = value;
            }
        }
    }
    c.validate()?;
    Ok(c)
}

/// Analytic and Monte Carlo metrics of every configured estimator at one
/// configuration, plus the CRLB of the same metric.
pub fn evaluate_point(cfg: &ScenarioConfig, var_value: f64, seed: u64) -> Result<Vec<SweepRow>> {
    let scenario = cfg.analytic_scenario()?;
    let metric = cfg.metric()?;
    let truth: Vec<f64> = scenario
        .ratios
        .iter()
        .map(|a| a * scenario.total_concentration)
        .collect();
    let crlb = match scenario.crlb()? {
        Some(b) => metric.evaluate(&b.concentration, &truth, scenario.total_concentration)?,
        None => f64::NAN,
    };
    let mut plan = Vec::new();
    for est in &cfg.estimators.kinds {
        let (kind, nu, analytic) = match est {
            SweepEstimator::Unbiased => {
                let nu = cfg.estimators.nu_unbiased;
                (
                    EstimatorKind::Unbiased,
                    nu,
                    scenario
                        .report(EstimatorKind::Unbiased, nu)?
                        .metric(metric)?,
                )
            }
            SweepEstimator::Biased => {
                let nu = cfg.estimators.nu_biased;
                (
                    EstimatorKind::Biased,
                    nu,
                    scenario.report(EstimatorKind::Biased, nu)?.metric(metric)?,
                )
            }
            SweepEstimator::NuOpt => {
                let opt = optimize_nu(&scenario, NU_SEARCH_RANGE)?;
                (EstimatorKind::Unbiased, opt.nu, opt.objective)
            }
        };
        let matrices = EstimatorMatrices::new(&scenario.scheme(nu)?, &scenario.rates)?;
        plan.push((*est, nu, analytic, McTarget { kind, matrices }));
    }
    let targets: Vec<McTarget> = plan.iter().map(|p| p.3.clone()).collect();
    let mc = if cfg.trials > 0 {
        Some(monte_carlo(
            &cfg.channel()?,
            &targets,
            &truth,
            cfg.model.samples,
            cfg.trials,
            seed,
            metric,
        )?)
    } else {
        None
    };
    Ok(plan
        .into_iter()
        .enumerate()
        .map(|(i, (estimator, nu, analytic, _))| {
            let (mc, mc_se) = mc
                .as_ref()
                .map_or((f64::NAN, f64::NAN), |s| (s[i].metric, s[i].metric_se));
            SweepRow {
                var: var_value,
                estimator,
                analytic,
                mc,
                mc_se,
                crlb,
                nu,
            }
        })
        .collect())
}

/// Evaluates every grid point in order. Point `i` draws from seed
/// `derive_seed(cfg.seed, i)`.
pub fn run_sweep(cfg: &ScenarioConfig, sweep: &Sweep) -> Result<Vec<SweepRow>> {
    if sweep.values.is_empty() {
        return Err(config("values", "the sweep grid is empty"));
    }
    let mut rows = Vec::new();
    for (i, v) in sweep.values.iter().enumerate() {
        let point = apply(cfg, sweep.var, *v)?;
        rows.extend(evaluate_point(&point, *v, derive_seed(cfg.seed, i as u64))?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let s = Sweep::range(SweepVar::M, 2.0, 10.0, None).unwrap();
        assert_eq!(s.values, (2..=10).map(f64::from).collect::<Vec<_>>());
        let n = Sweep::range(SweepVar::N, 100.0, 100_000.0, Some(4)).unwrap();
        assert_eq!(n.values, vec![100.0, 1000.0, 10_000.0, 100_000.0]);
        assert!(Sweep::range(SweepVar::Chi, 2.0, 1.0, None).is_err());
    }

    #[test]
    fn invalid_point_names_field() {
        let cfg = ScenarioConfig::defaults();
        match apply(&cfg, SweepVar::Chi, 0.5) {
            Err(crate::Error::Config { field, .. }) => assert_eq!(field, "model.chi"),
            other => panic!("{other:?}"),
        }
        assert!(apply(&cfg, SweepVar::M, 2.5).is_err());
    }

    #[test]
    fn analytic_only_rows() {
        let mut cfg = ScenarioConfig::defaults();
        cfg.trials = 0;
        cfg.estimators.kinds = vec![SweepEstimator::Unbiased, SweepEstimator::Biased];
        let rows = run_sweep(&cfg, &Sweep::range(SweepVar::M, 2.0, 4.0, None).unwrap()).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.mc.is_nan()));
        assert!(rows
            .iter()
            .filter(|r| r.estimator == SweepEstimator::Unbiased)
            .all(|r| r.crlb <= r.analytic));
    }
}
