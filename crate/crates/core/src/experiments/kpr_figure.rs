use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::montecarlo::mean_and_se;
use crate::error::Result;
use crate::estimators::{bin_probability_matrix, ThresholdScheme};
use crate::kpr::{kpr_mixture_stats, simulate_receptors, CountGaussian, KprScheme};
use crate::rng::derive_seed;

/// Histogram bins per substate.
pub const HISTOGRAM_BINS: usize = 30;

/// Per-substate comparison of simulated and predicted `n_{D_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstateSummary {
    pub substate: usize,
    pub empirical_mean: f64,
    pub empirical_se: f64,
    pub empirical_sd: f64,
    /// Absorption-probability Gaussian.
    pub kpr: CountGaussian,
    /// Gaussian of ideal threshold-binned counts.
    pub binned: CountGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub substate: usize,
    pub center: f64,
    pub empirical: f64,
    pub kpr: f64,
    pub binned: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KprFigure {
    pub replicates: usize,
    pub receptors: usize,
    pub substates: Vec<SubstateSummary>,
    pub n_s_mean: f64,
    pub n_s_se: f64,
    pub n_s_variance: f64,
    /// `μ·N / (k⁺·c_tot)`.
    pub n_s_expected: f64,
    pub histogram: Vec<HistogramRow>,
}

/// Simulates `cfg.kpr.replicates` independent receptor batches and sets
/// the distribution of each `n_{D_j}` against its Gaussian approximations.
/// Replicate `r` uses seed `derive_seed(cfg.seed, r)`.
pub fn run_kpr_figure(cfg: &ScenarioConfig) -> Result<KprFigure> {
    let mix = cfg.channel()?;
    let rates = cfg.rates()?;
    let scheme = ThresholdScheme::from_rates(&rates, cfg.estimators.nu_unbiased)?;
    let kpr = KprScheme::from_scheme(&scheme, cfg.kpr.kappa)?;
    let n = cfg.kpr.receptors;
    let reps = cfg.kpr.replicates.max(2);
    let runs = (0..reps)
        .into_par_iter()
        .map(|r| {
            simulate_receptors(
                &mix,
                &kpr,
                cfg.kpr.production_rate,
                n,
                derive_seed(cfg.seed, r as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let analytic = kpr_mixture_stats(&mix, &kpr, n as u64);
    let p_bin = bin_probability_matrix(&scheme, mix.unbinding_rates())
        * nalgebra::DVector::from_column_slice(mix.ratios());
    let m = kpr.substates();
    let mut substates = Vec::with_capacity(m);
    let mut histogram = Vec::new();
    for j in 0..m {
        let xs: Vec<f64> = runs.iter().map(|c| c.n_d[j] as f64).collect();
        let (mean, se) = mean_and_se(xs.iter().copied());
        let binned = CountGaussian::from_probability(p_bin[j], n as u64);
        substates.push(SubstateSummary {
            substate: j + 1,
            empirical_mean: mean,
            empirical_se: se,
            empirical_sd: se * (reps as f64).sqrt(),
            kpr: analytic[j],
            binned,
        });
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let mut bins = vec![0usize; HISTOGRAM_BINS];
        for x in &xs {
            bins[(((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1)] += 1;
        }
        for (b, count) in bins.iter().enumerate() {
            let center = lo + (b as f64 + 0.5) * width;
            histogram.push(HistogramRow {
                substate: j + 1,
                center,
                empirical: *count as f64 / (reps as f64 * width),
                kpr: analytic[j].density(center),
                binned: binned.density(center),
            });
        }
    }
    let ns: Vec<f64> = runs.iter().map(|c| c.n_s as f64).collect();
    let (n_s_mean, n_s_se) = mean_and_se(ns.iter().copied());
    Ok(KprFigure {
        replicates: reps,
        receptors: n,
        substates,
        n_s_mean,
        n_s_se,
        n_s_variance: n_s_se * n_s_se * reps as f64,
        n_s_expected: cfg.kpr.production_rate * n as f64
            / (mix.binding_rate() * mix.total_concentration()),
        histogram,
    })
}
