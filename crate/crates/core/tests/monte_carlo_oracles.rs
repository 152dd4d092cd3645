//! Analytic moments against simulation.

use ligandsense::estimators::{ml_ratio_oracle, EstimatorKind, EstimatorMatrices, ThresholdScheme};
use ligandsense::experiments::{
    mean_and_se, monte_carlo, total_concentration_trials, McTarget, ScenarioConfig,
};
use ligandsense::kinetics::{sample_observations, similarity_rates, DwellSampler, LigandMixture};
use ligandsense::rng::{derive_seed, stream};
use ligandsense::theory::{
    concentration_variance, crlb, mean_reciprocal_unbound_time, unbiased_ratio_variance,
    var_total_estimator, Metric, UnknownLigand,
};
use rayon::prelude::*;

/// Per-component z limit for five simultaneous comparisons at about 0.2% family-wise error.
const Z_JOINT: f64 = 3.5;

fn defaults() -> ScenarioConfig {
    ScenarioConfig::defaults()
}

fn target(cfg: &ScenarioConfig, kind: EstimatorKind, nu: f64) -> McTarget {
    let s = cfg.analytic_scenario().unwrap();
    McTarget {
        kind,
        matrices: EstimatorMatrices::new(&s.scheme(nu).unwrap(), &s.rates).unwrap(),
    }
}

#[test]
fn total_concentration_variance() {
    let mix = LigandMixture::uniform(1.0, vec![1.0], 1.0).unwrap();
    let est = total_concentration_trials(&mix, 100, 100_000, 11).unwrap();
    let (_, se) = mean_and_se(est.iter().copied());
    let var = se * se * est.len() as f64;
    let expected = var_total_estimator(1.0, 100).unwrap();
    assert!((var / expected - 1.0).abs() < 0.02, "{var} vs {expected}");
}

#[test]
fn reciprocal_unbound_time_mean() {
    let mix = LigandMixture::uniform(2.0, vec![1.0], 1.5).unwrap();
    let sampler = DwellSampler::new(&mix);
    let n = 50u64;
    let draws: Vec<f64> = (0..50_000)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(12, t);
            1.0 / (0..n).map(|_| sampler.draw_unbound(&mut rng)).sum::<f64>()
        })
        .collect();
    let (mean, se) = mean_and_se(draws.iter().copied());
    let expected = mean_reciprocal_unbound_time(1.5, 2.0, n).unwrap();
    assert!(
        (mean - expected).abs() < 3.0 * se,
        "{mean} vs {expected} ± {se}"
    );
}

#[test]
fn unbiased_ratio_and_concentration_variance_at_defaults() {
    let cfg = defaults();
    let s = cfg.analytic_scenario().unwrap();
    let truth: Vec<f64> = s.ratios.clone();
    let t = target(&cfg, EstimatorKind::Unbiased, 3.0);
    let ratio_var = unbiased_ratio_variance(&t.matrices.s, &s.ratios, 10_000).unwrap();
    let conc_var = concentration_variance(&ratio_var, &s.ratios, 1.0, 10_000).unwrap();
    let mc = monte_carlo(
        &cfg.channel().unwrap(),
        &[t],
        &truth,
        10_000,
        10_000,
        13,
        Metric::AverageNmse,
    )
    .unwrap()
    .remove(0);
    for i in 0..5 {
        let ratio_mc = mc.ratio_se[i].powi(2) * mc.trials as f64;
        assert!(
            (ratio_mc / ratio_var[i] - 1.0).abs() < 0.05,
            "ratio {i}: {ratio_mc} vs {}",
            ratio_var[i]
        );
        assert!(
            (mc.variance[i] / conc_var[i] - 1.0).abs() < 0.05,
            "conc {i}"
        );
        assert!((mc.ratio_mean[i] - truth[i]).abs() < Z_JOINT * mc.ratio_se[i]);
    }
}

#[test]
fn biased_estimator_mse_at_defaults() {
    let cfg = defaults();
    let s = cfg.analytic_scenario().unwrap();
    let report = s.report(EstimatorKind::Biased, 5.0).unwrap();
    let mc = monte_carlo(
        &cfg.channel().unwrap(),
        &[target(&cfg, EstimatorKind::Biased, 5.0)],
        &report.truth,
        10_000,
        10_000,
        14,
        Metric::AverageNmse,
    )
    .unwrap()
    .remove(0);
    for i in 0..5 {
        assert!((mc.mse[i] / report.mse[i] - 1.0).abs() < 0.05, "ligand {i}");
        assert!((mc.mean[i] - report.mean[i]).abs() < Z_JOINT * mc.mean_se[i]);
    }
}

#[test]
fn unknown_ligand_bias() {
    let mut cfg = defaults();
    cfg.unknown = vec![UnknownLigand {
        rate: 100.0,
        ratio: 0.1,
    }];
    let s = cfg.analytic_scenario().unwrap();
    let report = s.report(EstimatorKind::Unbiased, 3.0).unwrap();
    let mc = monte_carlo(
        &cfg.channel().unwrap(),
        &[target(&cfg, EstimatorKind::Unbiased, 3.0)],
        &report.truth,
        10_000,
        20_000,
        15,
        Metric::AverageNmse,
    )
    .unwrap()
    .remove(0);
    assert!(report.bias.iter().any(|b| b.abs() > 0.05));
    for i in 0..5 {
        assert!(
            (mc.mean[i] - report.mean[i]).abs() < Z_JOINT * mc.mean_se[i],
            "ligand {i}"
        );
    }
}

#[test]
fn em_oracle_reaches_separable_bound() {
    // far-apart rates make the mixture components almost labelled
    let rates = similarity_rates(2, 1e4, 1.0).unwrap();
    let alpha = [0.3, 0.7];
    let mix = LigandMixture::new(1.0, rates.clone(), alpha.to_vec(), 1.0).unwrap();
    let n = 2_000;
    let trials = 4_000;
    let est: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let obs = sample_observations(&mix, n, derive_seed(16, t)).unwrap();
            ml_ratio_oracle(&obs.bound_durations, &rates, 1e-10, 10_000)
                .unwrap()
                .ratios[0]
        })
        .collect();
    let (mean, se) = mean_and_se(est.iter().copied());
    let var = se * se * trials as f64;
    let bound = crlb(&alpha, &rates, n as u64, 1.0).unwrap().ratio[0];
    let separable = alpha[0] * (1.0 - alpha[0]) / n as f64;
    assert!(
        (bound / separable - 1.0).abs() < 1e-2,
        "{bound} vs {separable}"
    );
    assert!((var / bound - 1.0).abs() < 0.1, "{var} vs {bound}");
    assert!((mean - alpha[0]).abs() < 3.0 * se);
}

#[test]
fn dwell_sampler_moments() {
    let rates = vec![8.0, 2.0, 0.5];
    let alpha = vec![0.5, 0.3, 0.2];
    let mix = LigandMixture::new(3.0, rates.clone(), alpha.clone(), 0.7).unwrap();
    let sampler = DwellSampler::new(&mix);
    let mut rng = stream(17, 0);
    let n = 400_000;
    let mut unbound = Vec::with_capacity(n);
    let mut bound = Vec::with_capacity(n);
    let mut types = [0usize; 3];
    for _ in 0..n {
        let ev = sampler.draw_event(&mut rng);
        unbound.push(ev.unbound);
        bound.push(ev.bound);
        types[ev.ligand] += 1;
    }
    let (mu, su) = mean_and_se(unbound.iter().copied());
    assert!((mu - 1.0 / 2.1).abs() < 3.0 * su);
    let (mb, sb) = mean_and_se(bound.iter().copied());
    let expected: f64 = alpha.iter().zip(&rates).map(|(a, k)| a / k).sum();
    assert!((mb - expected).abs() < 3.0 * sb);
    for j in 0..3 {
        let f = types[j] as f64 / n as f64;
        let se = (alpha[j] * (1.0 - alpha[j]) / n as f64).sqrt();
        assert!((f - alpha[j]).abs() < 3.0 * se);
    }
    let scheme = ThresholdScheme::from_rates(&rates, 1.0).unwrap();
    let below: f64 = bound
        .iter()
        .filter(|t| **t < scheme.thresholds()[1])
        .count() as f64
        / n as f64;
    let cdf: f64 = alpha
        .iter()
        .zip(&rates)
        .map(|(a, k)| a * (1.0 - (-k * scheme.thresholds()[1]).exp()))
        .sum();
    assert!((below - cdf).abs() < 3.0 * (cdf * (1.0 - cdf) / n as f64).sqrt());
}
