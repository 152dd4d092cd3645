use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::{estimate_from_counts, EstimatorKind, EstimatorMatrices};
use crate::kinetics::{DwellSampler, LigandMixture};
use crate::rng;
use crate::theory::Metric;

/// A receiver evaluated in a Monte Carlo run.
#[derive(Debug, Clone)]
pub struct McTarget {
    pub kind: EstimatorKind,
    pub matrices: EstimatorMatrices,
}

/// Sample moments of an estimator over independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub trials: usize,
    pub ratio_mean: Vec<f64>,
    pub ratio_se: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of `mean`.
    pub mean_se: Vec<f64>,
    pub variance: Vec<f64>,
    pub mse: Vec<f64>,
    /// Mean over trials of the per-trial metric.
    pub metric: f64,
    pub metric_se: f64,
}

/// Per-trial estimates shared by every target.
struct Trial {
    ratios: Vec<Vec<f64>>,
    concentrations: Vec<Vec<f64>>,
}

/// Mean and standard error of a sequence.
pub fn mean_and_se(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Draws `trials` independent sets of `samples` events from `channel` and
/// applies every target to each, so targets are compared on identical
/// data. Trial `t` uses stream `t` of `seed`.
pub fn monte_carlo(
    channel: &LigandMixture,
    targets: &[McTarget],
    truth: &[f64],
    samples: u64,
    trials: usize,
    seed: u64,
    metric: Metric,
) -> Result<Vec<McSummary>> {
    let sampler = DwellSampler::new(channel);
    let k_on = channel.binding_rate();
    let results: Vec<Result<Trial>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            let mut counts: Vec<Vec<u64>> = targets
                .iter()
                .map(|x| vec![0; x.matrices.scheme.intervals()])
                .collect();
            let mut unbound = 0.0;
            for _ in 0..samples {
                let ev = sampler.draw_event(&mut rng);
                unbound += ev.unbound;
                for (x, c) in targets.iter().zip(counts.iter_mut()) {
                    if let Some(i) = x.matrices.scheme.bin_of(ev.bound) {
                        c[i] += 1;
                    }
                }
            }
            let mut trial = Trial {
                ratios: Vec::with_capacity(targets.len()),
                concentrations: Vec::with_capacity(targets.len()),
            };
            for (x, c) in targets.iter().zip(&counts) {
                let e = estimate_from_counts(x.kind, unbound, samples, c, &x.matrices, k_on)?;
                trial.ratios.push(e.ratios);
                trial.concentrations.push(e.concentrations);
            }
            Ok(trial)
        })
        .collect();
    let trials_out: Vec<Trial> = results.into_iter().collect::<Result<_>>()?;
    let c_tot = channel.total_concentration();
    (0..targets.len())
        .map(|x| summarize(&trials_out, x, truth, c_tot, metric))
        .collect()
}

fn summarize(
    trials: &[Trial],
    x: usize,
    truth: &[f64],
    c_tot: f64,
    metric: Metric,
) -> Result<McSummary> {
    let m = truth.len();
    let col = |f: &dyn Fn(&Trial) -> f64| -> (f64, f64) { mean_and_se(trials.iter().map(f)) };
    let mut ratio_mean = Vec::with_capacity(m);
    let mut ratio_se = Vec::with_capacity(m);
    let mut mean = Vec::with_capacity(m);
    let mut mean_se = Vec::with_capacity(m);
    let mut variance = Vec::with_capacity(m);
    let mut mse = Vec::with_capacity(m);
    let n = trials.len() as f64;
    for i in 0..m {
        let (rm, rs) = col(&|t| t.ratios[x][i]);
        ratio_mean.push(rm);
        ratio_se.push(rs);
        let (cm, cs) = col(&|t| t.concentrations[x][i]);
        mean.push(cm);
        mean_se.push(cs);
        variance.push(cs * cs * n);
        mse.push(
            trials
                .iter()
                .map(|t| (t.concentrations[x][i] - truth[i]).powi(2))
                .sum::<f64>()
                / n,
        );
    }
    let per_trial: Vec<f64> = trials
        .iter()
        .map(|t| {
            let sq: Vec<f64> = t.concentrations[x]
                .iter()
                .zip(truth)
                .map(|(c, e)| (c - e).powi(2))
                .collect();
            metric.evaluate(&sq, truth, c_tot)
        })
        .collect::<Result<_>>()?;
    let (metric_mean, metric_se) = mean_and_se(per_trial.iter().copied());
    Ok(McSummary {
        trials: trials.len(),
        ratio_mean,
        ratio_se,
        mean,
        mean_se,
        variance,
        mse,
        metric: metric_mean,
        metric_se,
    })
}

/// `ĉ_tot` over independent trials of `samples` unbound durations.
pub fn total_concentration_trials(
    mix: &LigandMixture,
    samples: u64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let sampler = DwellSampler::new(mix);
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            let unbound: f64 = (0..samples).map(|_| sampler.draw_unbound(&mut rng)).sum();
            crate::estimators::estimate_total_concentration(
                unbound,
                samples as usize,
                mix.binding_rate(),
            )
        })
        .collect()
}
