use std::io::Write;

use super::config::ScenarioConfig;
use super::kpr_figure::KprFigure;
use super::sweep::{SweepRow, SWEEP_HEADER};
use crate::crn::SenseOutcome;
use crate::error::Result;
use crate::estimators::{estimate_concentrations, EstimatorKind, EstimatorMatrices};
use crate::kinetics::{BindingEvent, ObservationSet};
use crate::theory::{crlb, fisher_information, ErrorReport, NuOptimum, FISHER_TOLERANCE};

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-tripping decimal; NaN becomes an empty cell.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&SWEEP_HEADER);
    for r in rows {
        t.push(vec![
            fmt_f64(r.var),
            r.estimator.as_str().to_string(),
            fmt_f64(r.analytic),
            fmt_f64(r.mc),
            fmt_f64(r.mc_se),
            fmt_f64(r.crlb),
        ]);
    }
    t
}

pub fn events_table(events: &[BindingEvent]) -> Table {
    let mut t = Table::new(&["event", "ligand", "unbound", "bound"]);
    for (i, e) in events.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            (e.ligand + 1).to_string(),
            fmt_f64(e.unbound),
            fmt_f64(e.bound),
        ]);
    }
    t
}

/// Estimates from `obs` next to the analytic moments of each estimator.
pub fn estimate_table(cfg: &ScenarioConfig, obs: &ObservationSet) -> Result<Table> {
    let mut scenario = cfg.analytic_scenario()?;
    scenario.samples = obs.bound_durations.len() as u64;
    let mut t = Table::new(&[
        "estimator",
        "ligand",
        "truth",
        "estimate",
        "analytic_mean",
        "analytic_bias",
        "analytic_variance",
        "analytic_mse",
    ]);
    for est in &cfg.estimators.kinds {
        let (kind, nu) = match est {
            super::SweepEstimator::Unbiased => {
                (EstimatorKind::Unbiased, cfg.estimators.nu_unbiased)
            }
            super::SweepEstimator::Biased => (EstimatorKind::Biased, cfg.estimators.nu_biased),
            super::SweepEstimator::NuOpt => (
                EstimatorKind::Unbiased,
                crate::theory::optimize_nu(&scenario, crate::theory::NU_SEARCH_RANGE)?.nu,
            ),
        };
        let matrices = EstimatorMatrices::new(&scenario.scheme(nu)?, &scenario.rates)?;
        let e = estimate_concentrations(kind, obs, &matrices, cfg.model.binding_rate)?;
        // too few events leave the analytic moments undefined
        let report = scenario.report(kind, nu).ok();
        let cell = |f: fn(&ErrorReport) -> &[f64], i: usize| {
            fmt_f64(report.as_ref().map_or(f64::NAN, |r| f(r)[i]))
        };
        for i in 0..scenario.rates.len() {
            t.push(vec![
                est.as_str().to_string(),
                (i + 1).to_string(),
                fmt_f64(scenario.total_concentration * scenario.ratios[i]),
                fmt_f64(e.concentrations[i]),
                cell(|r| &r.mean, i),
                cell(|r| &r.bias, i),
                cell(|r| &r.variance, i),
                cell(|r| &r.mse, i),
            ]);
        }
    }
    Ok(t)
}

/// Fisher information diagonal and bounds per ligand.
pub fn crlb_table(cfg: &ScenarioConfig) -> Result<Table> {
    let rates = cfg.rates()?;
    let ratios = cfg.known_ratios()?;
    let n = cfg.model.samples;
    let bounds = crlb(&ratios, &rates, n, cfg.model.total_concentration)?;
    let present: Vec<usize> = (0..ratios.len()).filter(|i| ratios[*i] > 0.0).collect();
    let fisher = fisher_information(
        &present.iter().map(|i| ratios[*i]).collect::<Vec<_>>(),
        &present.iter().map(|i| rates[*i]).collect::<Vec<_>>(),
        n,
        FISHER_TOLERANCE,
    )?;
    let mut t = Table::new(&[
        "ligand",
        "rate",
        "ratio",
        "fisher",
        "ratio_crlb",
        "ratio_crlb_unconstrained",
        "concentration_crlb",
        "concentration_crlb_unconstrained",
    ]);
    for i in 0..rates.len() {
        let f = present
            .iter()
            .position(|p| *p == i)
            .map_or(f64::NAN, |k| fisher.matrix[(k, k)]);
        t.push(vec![
            (i + 1).to_string(),
            fmt_f64(rates[i]),
            fmt_f64(ratios[i]),
            fmt_f64(f),
            fmt_f64(bounds.ratio[i]),
            fmt_f64(bounds.ratio_unconstrained[i]),
            fmt_f64(bounds.concentration[i]),
            fmt_f64(bounds.concentration_unconstrained[i]),
        ]);
    }
    Ok(t)
}

pub fn kpr_histogram_table(fig: &KprFigure) -> Table {
    let mut t = Table::new(&[
        "substate",
        "count",
        "empirical",
        "kpr_gaussian",
        "binned_gaussian",
    ]);
    for r in &fig.histogram {
        t.push(vec![
            r.substate.to_string(),
            fmt_f64(r.center),
            fmt_f64(r.empirical),
            fmt_f64(r.kpr),
            fmt_f64(r.binned),
        ]);
    }
    t
}

pub fn kpr_summary_table(fig: &KprFigure) -> Table {
    let mut t = Table::new(&[
        "species",
        "empirical_mean",
        "empirical_se",
        "kpr_mean",
        "kpr_sd",
        "binned_mean",
        "binned_sd",
    ]);
    for s in &fig.substates {
        t.push(vec![
            format!("D{}", s.substate),
            fmt_f64(s.empirical_mean),
            fmt_f64(s.empirical_se),
            fmt_f64(s.kpr.mean),
            fmt_f64(s.kpr.variance.sqrt()),
            fmt_f64(s.binned.mean),
            fmt_f64(s.binned.variance.sqrt()),
        ]);
    }
    t.push(vec![
        "S".into(),
        fmt_f64(fig.n_s_mean),
        fmt_f64(fig.n_s_se),
        fmt_f64(fig.n_s_expected),
        String::new(),
        String::new(),
        String::new(),
    ]);
    t
}

pub fn crn_table(truth: &[f64], out: &SenseOutcome) -> Table {
    let mut t = Table::new(&["ligand", "truth", "software", "crn", "n_y", "n_d"]);
    for i in 0..truth.len() {
        t.push(vec![
            (i + 1).to_string(),
            fmt_f64(truth[i]),
            fmt_f64(out.software.concentrations[i]),
            fmt_f64(out.crn.concentrations[i]),
            fmt_f64(out.n_y[i]),
            out.counts.n_d[i].to_string(),
        ]);
    }
    t
}

pub fn nu_table(results: &[NuOptimum]) -> Table {
    let mut t = Table::new(&["method", "nu", "objective"]);
    for r in results {
        let method = match r.method {
            crate::theory::NuSearch::GoldenSection => "golden_section",
            crate::theory::NuSearch::GridFallback => "grid",
        };
        t.push(vec![method.into(), fmt_f64(r.nu), fmt_f64(r.objective)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1e-300, 12345.678, -3.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NAN), "");
    }

    #[test]
    fn crlb_single_ligand_fisher_is_n() {
        let mut cfg = ScenarioConfig::defaults();
        cfg.model.ligand_types = 1;
        let t = crlb_table(&cfg).unwrap();
        let f: f64 = t.rows[0][3].parse().unwrap();
        assert!((f / 10_000.0 - 1.0).abs() < 1e-8);
    }
}
