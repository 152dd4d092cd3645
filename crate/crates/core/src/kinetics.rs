//! Ligand mixtures and equilibrium dwell-time statistics of a single
//! receptor type.
//!
//! A receptor alternates between an unbound state, left at rate
//! `k⁺·c_tot`, and a bound state, left at rate `k⁻_j` where `j` is the
//! type of the ligand that bound. At equilibrium the bound ligand's type
//! is drawn with probability `α_j = c_j / c_tot`, so the bound dwell time
//! is a mixture of exponentials.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::estimators::ThresholdScheme;
use crate::rng::{self, SimRng};

const RATIO_SUM_TOLERANCE: f64 = 1e-12;

/// The channel state seen by the receptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LigandMixture {
    binding_rate: f64,
    unbinding_rates: Vec<f64>,
    ratios: Vec<f64>,
    total_concentration: f64,
}

impl LigandMixture {
    /// Validates and builds a mixture. Unbinding rates must be strictly
    /// decreasing (lowest affinity first) and ratios must lie on the simplex.
    pub fn new(
        binding_rate: f64,
        unbinding_rates: Vec<f64>,
        ratios: Vec<f64>,
        total_concentration: f64,
    ) -> Result<Self> {
        if !(binding_rate > 0.0 && binding_rate.is_finite()) {
            return Err(domain(format!(
                "binding rate must be positive, got {binding_rate}"
            )));
        }
        if !(total_concentration > 0.0 && total_concentration.is_finite()) {
            return Err(domain(format!(
                "total concentration must be positive, got {total_concentration}"
            )));
        }
        check_rates(&unbinding_rates)?;
        check_ratios(&ratios, unbinding_rates.len())?;
        Ok(Self {
            binding_rate,
            unbinding_rates,
            ratios,
            total_concentration,
        })
    }

    /// Equal ratios for every ligand type.
    pub fn uniform(
        binding_rate: f64,
        unbinding_rates: Vec<f64>,
        total_concentration: f64,
    ) -> Result<Self> {
        let m = unbinding_rates.len().max(1);
        let ratios = vec![1.0 / m as f64; unbinding_rates.len()];
        Self::new(binding_rate, unbinding_rates, ratios, total_concentration)
    }

    pub fn binding_rate(&self) -> f64 {
        self.binding_rate
    }

    pub fn unbinding_rates(&self) -> &[f64] {
        &self.unbinding_rates
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn total_concentration(&self) -> f64 {
        self.total_concentration
    }

    /// Number of ligand types `M`.
    pub fn len(&self) -> usize {
        self.unbinding_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unbinding_rates.is_empty()
    }

    /// Individual concentrations `c_i = c_tot·α_i`.
    pub fn concentrations(&self) -> Vec<f64> {
        self.ratios
            .iter()
            .map(|a| a * self.total_concentration)
            .collect()
    }

    /// Dissociation constants `K_D,i = k⁻_i / k⁺`.
    pub fn dissociation_constants(&self) -> Vec<f64> {
        self.unbinding_rates
            .iter()
            .map(|k| k / self.binding_rate)
            .collect()
    }

    /// Same ligand types and ratios at a different total concentration.
    pub fn with_total_concentration(&self, total_concentration: f64) -> Result<Self> {
        Self::new(
            self.binding_rate,
            self.unbinding_rates.clone(),
            self.ratios.clone(),
            total_concentration,
        )
    }
}

pub(crate) fn check_rates(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(domain("at least one ligand type is required"));
    }
    if rates.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(domain("unbinding rates must be positive and finite"));
    }
    if rates.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(domain(
            "unbinding rates must be strictly decreasing (duplicates make ligands indistinguishable)",
        ));
    }
    Ok(())
}

pub(crate) fn check_ratios(ratios: &[f64], m: usize) -> Result<()> {
    if ratios.len() != m {
        return Err(domain(format!("expected {m} ratios, got {}", ratios.len())));
    }
    if ratios.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(domain("concentration ratios must be non-negative"));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > RATIO_SUM_TOLERANCE {
        return Err(domain(format!(
            "concentration ratios must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// Unbinding rates spaced geometrically by the similarity parameter:
/// `k⁻_{M-i} = χ^i·k⁻_M`, returned in decreasing order.
pub fn similarity_rates(m: usize, chi: f64, anchor_rate: f64) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(domain("at least one ligand type is required"));
    }
    if !(chi > 1.0 && chi.is_finite()) {
        return Err(domain(format!(
            "similarity parameter must exceed 1, got {chi}"
        )));
    }
    if !(anchor_rate > 0.0 && anchor_rate.is_finite()) {
        return Err(domain("anchor unbinding rate must be positive"));
    }
    Ok((0..m)
        .map(|i| anchor_rate * chi.powi((m - 1 - i) as i32))
        .collect())
}

/// Diffusion-limited binding rate of a circular receptor, `k⁺ = 4·D·a`.
pub fn diffusion_limited_binding_rate(diffusivity: f64, receptor_size: f64) -> Result<f64> {
    if !(diffusivity > 0.0) || !(receptor_size > 0.0) {
        return Err(domain("diffusivity and receptor size must be positive"));
    }
    Ok(4.0 * diffusivity * receptor_size)
}

/// Equilibrium probability that a receptor is bound.
pub fn bound_probability(mix: &LigandMixture) -> f64 {
    let x: f64 = mix
        .concentrations()
        .iter()
        .zip(mix.dissociation_constants())
        .map(|(c, kd)| c / kd)
        .sum();
    x / (1.0 + x)
}

/// Mean and variance of the bound-receptor count among `receptors`
/// independent receptors.
pub fn bound_count_stats(mix: &LigandMixture, receptors: u64) -> Result<(f64, f64)> {
    if receptors == 0 {
        return Err(domain("receptor count must be at least 1"));
    }
    let p = bound_probability(mix);
    let n = receptors as f64;
    Ok((p * n, p * (1.0 - p) * n))
}

/// Density of the bound dwell time, `Σ α_j k⁻_j exp(-k⁻_j τ)`.
pub fn bound_time_pdf(mix: &LigandMixture, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(domain(format!(
            "dwell time must be non-negative, got {tau}"
        )));
    }
    Ok(mixture_pdf(mix.ratios(), mix.unbinding_rates(), tau))
}

/// Distribution function of the bound dwell time.
pub fn bound_time_cdf(mix: &LigandMixture, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(domain(format!(
            "dwell time must be non-negative, got {tau}"
        )));
    }
    Ok(mix
        .ratios()
        .iter()
        .zip(mix.unbinding_rates())
        .map(|(a, k)| -a * (-k * tau).exp_m1())
        .sum())
}

pub(crate) fn mixture_pdf(ratios: &[f64], rates: &[f64], tau: f64) -> f64 {
    ratios
        .iter()
        .zip(rates)
        .map(|(a, k)| a * k * (-k * tau).exp())
        .sum()
}

/// `ln p(τ)` evaluated without underflow for long dwell times.
pub(crate) fn mixture_log_pdf(ratios: &[f64], rates: &[f64], tau: f64) -> f64 {
    let k_min = ratios
        .iter()
        .zip(rates)
        .filter(|(a, _)| **a > 0.0)
        .map(|(_, k)| *k)
        .fold(f64::INFINITY, f64::min);
    if !k_min.is_finite() {
        return f64::NEG_INFINITY;
    }
    let scaled: f64 = ratios
        .iter()
        .zip(rates)
        .map(|(a, k)| a * k * (-(k - k_min) * tau).exp())
        .sum();
    scaled.ln() - k_min * tau
}

/// Dwell-time statistics pooled over receptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    /// Sum of all unbound dwell times.
    pub total_unbound_time: f64,
    /// One bound dwell time per binding event.
    pub bound_durations: Vec<f64>,
    /// Seed the set was sampled with, if simulated.
    pub seed: Option<u64>,
}

impl ObservationSet {
    pub fn new(total_unbound_time: f64, bound_durations: Vec<f64>) -> Result<Self> {
        if !(total_unbound_time > 0.0 && total_unbound_time.is_finite()) {
            return Err(domain("total unbound time must be positive"));
        }
        if bound_durations.is_empty() {
            return Err(domain("at least one bound duration is required"));
        }
        if bound_durations
            .iter()
            .any(|t| !(*t >= 0.0 && t.is_finite()))
        {
            return Err(domain("bound durations must be non-negative and finite"));
        }
        Ok(Self {
            total_unbound_time,
            bound_durations,
            seed: None,
        })
    }

    /// Number of unbound/bound samples `N`.
    pub fn samples(&self) -> usize {
        self.bound_durations.len()
    }
}

/// Precomputed samplers for one mixture.
///
/// Each event consumes, in order: an unbound duration, a uniform for the
/// ligand type, and a bound duration.
#[derive(Debug, Clone)]
pub struct DwellSampler {
    unbound: Exp<f64>,
    bound: Vec<Exp<f64>>,
    cumulative: Vec<f64>,
    last_present: usize,
}

/// One event drawn by [`DwellSampler`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BindingEvent {
    pub unbound: f64,
    pub ligand: usize,
    pub bound: f64,
}

/// Sufficient statistics of one Monte Carlo replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSample {
    pub samples: usize,
    pub total_unbound_time: f64,
    pub counts: Vec<u64>,
}

impl BinnedSample {
    pub fn retained(&self) -> u64 {
        self.counts.iter().sum()
    }
}

impl DwellSampler {
    pub fn new(mix: &LigandMixture) -> Self {
        let unbound = Exp::new(mix.binding_rate() * mix.total_concentration())
            .expect("rate validated by LigandMixture");
        let bound = mix
            .unbinding_rates()
            .iter()
            .map(|k| Exp::new(*k).expect("rate validated by LigandMixture"))
            .collect();
        let mut acc = 0.0;
        let cumulative = mix
            .ratios()
            .iter()
            .map(|a| {
                acc += a;
                acc
            })
            .collect();
        let last_present = mix.ratios().iter().rposition(|a| *a > 0.0).unwrap_or(0);
        Self {
            unbound,
            bound,
            cumulative,
            last_present,
        }
    }

    pub fn ligand_types(&self) -> usize {
        self.bound.len()
    }

    pub fn draw_ligand(&self, rng: &mut SimRng) -> usize {
        let u: f64 = rng.random();
        // rounding can leave the last cumulative value just below 1
        self.cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.last_present)
    }

    pub fn draw_unbound(&self, rng: &mut SimRng) -> f64 {
        self.unbound.sample(rng)
    }

    pub fn draw_bound(&self, ligand: usize, rng: &mut SimRng) -> f64 {
        self.bound[ligand].sample(rng)
    }

    pub fn draw_event(&self, rng: &mut SimRng) -> BindingEvent {
        let unbound = self.draw_unbound(rng);
        let ligand = self.draw_ligand(rng);
        let bound = self.draw_bound(ligand, rng);
        BindingEvent {
            unbound,
            ligand,
            bound,
        }
    }

    /// Draws `n` events and returns the full observation set.
    pub fn observations(&self, n: usize, rng: &mut SimRng) -> ObservationSet {
        let mut total_unbound_time = 0.0;
        let bound_durations = (0..n)
            .map(|_| {
                let ev = self.draw_event(rng);
                total_unbound_time += ev.unbound;
                ev.bound
            })
            .collect();
        ObservationSet {
            total_unbound_time,
            bound_durations,
            seed: None,
        }
    }

    /// Draws `n` events and keeps only the total unbound time and bin
    /// counts. Consumes the generator exactly like [`Self::observations`].
    pub fn binned(&self, n: usize, scheme: &ThresholdScheme, rng: &mut SimRng) -> BinnedSample {
        let mut counts = vec![0u64; scheme.intervals()];
        let mut total_unbound_time = 0.0;
        for _ in 0..n {
            let ev = self.draw_event(rng);
            total_unbound_time += ev.unbound;
            if let Some(bin) = scheme.bin_of(ev.bound) {
                counts[bin] += 1;
            }
        }
        BinnedSample {
            samples: n,
            total_unbound_time,
            counts,
        }
    }
}

/// Draws `n` i.i.d. unbound/bound dwell-time pairs. Deterministic in `seed`.
pub fn sample_observations(mix: &LigandMixture, n: usize, seed: u64) -> Result<ObservationSet> {
    if n < 3 {
        return Err(domain(format!("at least 3 samples are required, got {n}")));
    }
    let mut rng = rng::from_seed(seed);
    let mut obs = DwellSampler::new(mix).observations(n, &mut rng);
    obs.seed = Some(seed);
    Ok(obs)
}

/// Parameter-dependent part of the log-likelihood,
/// `N·ln(c_tot) − k⁺·c_tot·T_u + Σ ln p(τ_b)`.
///
/// The constant term that depends on neither `c_tot` nor `α` is omitted, so
/// only differences between parameter values are meaningful.
pub fn log_likelihood(
    obs: &ObservationSet,
    total_concentration: f64,
    ratios: &[f64],
    binding_rate: f64,
    unbinding_rates: &[f64],
) -> Result<f64> {
    if !(total_concentration > 0.0) {
        return Err(domain("total concentration must be positive"));
    }
    if !(binding_rate > 0.0) {
        return Err(domain("binding rate must be positive"));
    }
    if unbinding_rates.iter().any(|k| !(*k > 0.0)) {
        return Err(domain("unbinding rates must be positive"));
    }
    check_ratios(ratios, unbinding_rates.len())?;
    let n = obs.samples() as f64;
    let unbound_term =
        n * total_concentration.ln() - binding_rate * total_concentration * obs.total_unbound_time;
    Ok(unbound_term + ratio_log_likelihood(&obs.bound_durations, ratios, unbinding_rates))
}

/// `Σ ln p(τ_b)` for the bound-time mixture.
pub fn ratio_log_likelihood(bound_durations: &[f64], ratios: &[f64], rates: &[f64]) -> f64 {
    bound_durations
        .iter()
        .map(|t| mixture_log_pdf(ratios, rates, *t))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mix2() -> LigandMixture {
        LigandMixture::new(1.0, vec![2.0, 1.0], vec![0.5, 0.5], 1.0).unwrap()
    }

    #[test]
    fn binding_rate_from_diffusion() {
        assert_eq!(diffusion_limited_binding_rate(1.0, 0.25).unwrap(), 1.0);
        let k = diffusion_limited_binding_rate(100.0, 0.01).unwrap();
        assert!((k - 4.0).abs() < 1e-12);
        assert!(diffusion_limited_binding_rate(0.0, 1.0).is_err());
        assert!(diffusion_limited_binding_rate(1.0, -1.0).is_err());
    }

    #[test]
    fn mixture_validation() {
        assert!(LigandMixture::new(1.0, vec![1.0, 1.0], vec![0.5, 0.5], 1.0).is_err());
        assert!(LigandMixture::new(1.0, vec![1.0, 2.0], vec![0.5, 0.5], 1.0).is_err());
        assert!(LigandMixture::new(1.0, vec![2.0, 1.0], vec![0.6, 0.5], 1.0).is_err());
        assert!(LigandMixture::new(1.0, vec![2.0, 1.0], vec![1.1, -0.1], 1.0).is_err());
        assert!(LigandMixture::new(0.0, vec![2.0, 1.0], vec![0.5, 0.5], 1.0).is_err());
        assert!(LigandMixture::new(1.0, vec![2.0, 1.0], vec![0.5, 0.5], 0.0).is_err());
    }

    #[test]
    fn similarity_rule() {
        let k = similarity_rates(5, 5.0, 1.0).unwrap();
        assert_eq!(k, vec![625.0, 125.0, 25.0, 5.0, 1.0]);
        assert!(similarity_rates(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn bound_probability_examples() {
        // c = K_D
        let m = LigandMixture::new(2.0, vec![4.0], vec![1.0], 2.0).unwrap();
        assert!((bound_probability(&m) - 0.5).abs() < 1e-15);
        // c1/K1 = 1, c2/K2 = 2
        let m = LigandMixture::new(1.0, vec![2.0, 1.0], vec![0.5, 0.5], 4.0).unwrap();
        assert!((bound_probability(&m) - 0.75).abs() < 1e-15);
        let tiny = m.with_total_concentration(1e-300).unwrap();
        assert!(bound_probability(&tiny) < 1e-299);
    }

    #[test]
    fn bound_count_moments() {
        let m = LigandMixture::new(2.0, vec![4.0], vec![1.0], 2.0).unwrap();
        assert_eq!(bound_count_stats(&m, 100).unwrap(), (50.0, 25.0));
        assert!(bound_count_stats(&m, 0).is_err());
        let nearly_empty = m.with_total_concentration(1e-300).unwrap();
        let (mean, var) = bound_count_stats(&nearly_empty, 10).unwrap();
        assert!(mean < 1e-298 && var < 1e-298);
        let saturated = m.with_total_concentration(1e300).unwrap();
        let (mean, var) = bound_count_stats(&saturated, 10).unwrap();
        assert!((mean - 10.0).abs() < 1e-12 && var < 1e-12);
    }

    #[test]
    fn pdf_values() {
        let one = LigandMixture::new(1.0, vec![3.0], vec![1.0], 1.0).unwrap();
        assert_eq!(bound_time_pdf(&one, 0.0).unwrap(), 3.0);
        assert!((bound_time_pdf(&mix2(), 0.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(bound_time_pdf(&mix2(), -1.0).is_err());
        assert!(bound_time_cdf(&mix2(), -1.0).is_err());
        let lp = mixture_log_pdf(&[0.5, 0.5], &[2.0, 1.0], 0.3);
        assert!((lp - bound_time_pdf(&mix2(), 0.3).unwrap().ln()).abs() < 1e-14);
        // far tail stays finite
        assert!(mixture_log_pdf(&[0.5, 0.5], &[2.0, 1.0], 1e4).is_finite());
    }

    #[test]
    fn log_likelihood_single_event() {
        let obs = ObservationSet::new(1.0, vec![0.0]).unwrap();
        let ll = log_likelihood(&obs, 1.0, &[1.0], 1.0, &[3.0]).unwrap();
        assert!((ll - 3.0f64.ln() + 1.0).abs() < 1e-15);
        assert!(log_likelihood(&obs, 0.0, &[1.0], 1.0, &[3.0]).is_err());
        assert!(log_likelihood(&obs, 1.0, &[0.7], 1.0, &[3.0]).is_err());
    }

    #[test]
    fn log_likelihood_peaks_at_ml_total() {
        let obs = ObservationSet::new(40.0, vec![0.1; 10]).unwrap();
        let c_hat = 10.0 / (2.0 * 40.0);
        let at = |c: f64| log_likelihood(&obs, c, &[1.0], 2.0, &[1.0]).unwrap();
        assert!(at(c_hat) > at(c_hat * 1.01));
        assert!(at(c_hat) > at(c_hat * 0.99));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_observations(&mix2(), 100, 42).unwrap();
        let b = sample_observations(&mix2(), 100, 42).unwrap();
        let c = sample_observations(&mix2(), 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.seed, Some(42));
        assert!(sample_observations(&mix2(), 2, 1).is_err());
        assert!(a.bound_durations.iter().all(|t| *t > 0.0));
    }
}
