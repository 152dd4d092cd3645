//! Scenario configuration, parameter sweeps, Monte Carlo validation and
//! the tables and figures built from them.

mod config;
mod kpr_figure;
mod montecarlo;
mod output;
pub mod plot;
mod sweep;

pub use config::{
    EstimatorConfig, KprConfig, MetricChoice, ModelConfig, RatioKind, RatiosConfig, ScenarioConfig,
    SweepEstimator, BUILTIN_DEFAULTS, SCHEMA_VERSION,
};
pub use kpr_figure::{run_kpr_figure, HistogramRow, KprFigure, SubstateSummary, HISTOGRAM_BINS};
pub use montecarlo::{mean_and_se, monte_carlo, total_concentration_trials, McSummary, McTarget};
pub use output::{
    crlb_table, crn_table, estimate_table, events_table, fmt_f64, kpr_histogram_table,
    kpr_summary_table, nu_table, sweep_table, Table,
};
pub use sweep::{
    apply, evaluate_point, run_sweep, Sweep, SweepRow, SweepVar, DEFAULT_UNKNOWN, SWEEP_HEADER,
};

use plot::{Plot, Series, Style};

/// Analytic curves, Monte Carlo markers and the CRLB of a sweep.
pub fn sweep_plot(var: SweepVar, rows: &[SweepRow]) -> Plot {
    let mut p = Plot::new(
        &format!("sweep over {}", var.as_str()),
        var.as_str(),
        "metric",
    );
    p.log_y = true;
    p.log_x = matches!(var, SweepVar::N | SweepVar::KU);
    let mut kinds: Vec<SweepEstimator> = Vec::new();
    for r in rows {
        if !kinds.contains(&r.estimator) {
            kinds.push(r.estimator);
        }
    }
    for k in kinds {
        let of = || rows.iter().filter(move |r| r.estimator == k);
        p.series.push(Series {
            name: format!("{} analytic", k.as_str()),
            points: of().map(|r| (r.var, r.analytic)).collect(),
            style: Style::Line,
        });
        p.series.push(Series {
            name: format!("{} monte carlo", k.as_str()),
            points: of().map(|r| (r.var, r.mc)).collect(),
            style: Style::Markers,
        });
    }
    let first = rows.first().map(|r| r.estimator);
    p.series.push(Series {
        name: "CRLB".into(),
        points: rows
            .iter()
            .filter(|r| Some(r.estimator) == first)
            .map(|r| (r.var, r.crlb))
            .collect(),
        style: Style::Line,
    });
    p
}

/// Empirical histograms with both Gaussian overlays.
pub fn kpr_plot(fig: &KprFigure) -> Plot {
    let mut p = Plot::new("messenger counts", "n_D", "density");
    for s in &fig.substates {
        let rows: Vec<&HistogramRow> = fig
            .histogram
            .iter()
            .filter(|r| r.substate == s.substate)
            .collect();
        p.series.push(Series {
            name: format!("D{} simulated", s.substate),
            points: rows.iter().map(|r| (r.center, r.empirical)).collect(),
            style: Style::Steps,
        });
        p.series.push(Series {
            name: format!("D{} analytic", s.substate),
            points: rows.iter().map(|r| (r.center, r.kpr)).collect(),
            style: Style::Line,
        });
    }
    p
}
