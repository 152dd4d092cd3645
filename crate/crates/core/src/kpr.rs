//! Modified kinetic-proofreading receptor.
//!
//! A bound receptor starts in substate 1 and advances from substate `j` to
//! `j+1` at rate `β_j`. The ligand unbinds at its own rate `k⁻` in every
//! substate; unbinding from substate `j` releases one `D_j` messenger.
//! While unbound, the receptor produces `S` messengers at rate `μ`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::estimators::ThresholdScheme;
use crate::kinetics::{DwellSampler, LigandMixture, ObservationSet};
use crate::rng::{self, SimRng};

/// Default tuning parameter for every transition.
pub const DEFAULT_KAPPA: f64 = 0.6;
/// Receptors simulated per RNG stream.
pub const RECEPTOR_CHUNK: usize = 4096;
const GAUSSIAN_MIN_RECEPTORS: u64 = 1000;

/// Substate transition rates of a KPR receptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KprScheme {
    /// `β_j` for the transition `j → j+1`, `M − 1` entries.
    pub beta: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `T_0, …, T_{M-1}` the rates were derived from.
    pub thresholds: Vec<f64>,
}

impl KprScheme {
    /// Number of substates `M`.
    pub fn substates(&self) -> usize {
        self.beta.len() + 1
    }

    /// Builds rates from the finite thresholds of an estimator scheme with
    /// the same `κ` on every transition.
    pub fn from_scheme(scheme: &ThresholdScheme, kappa: f64) -> Result<Self> {
        let t = scheme.thresholds();
        let m = scheme.intervals();
        kpr_rates(&t[..m], &vec![kappa; m - 1])
    }

    /// Same transitions with every `κ` (and so every `β`) multiplied by `f`.
    pub fn scaled(&self, f: f64) -> Result<Self> {
        let kappa: Vec<f64> = self.kappa.iter().map(|k| k * f).collect();
        kpr_rates(&self.thresholds, &kappa)
    }
}

/// `β_j = κ_j / (T_j − T_{j-1})` for thresholds `T_0 < … < T_{M-1}`.
pub fn kpr_rates(thresholds: &[f64], kappa: &[f64]) -> Result<KprScheme> {
    if thresholds.is_empty() {
        return Err(domain("at least T_0 is required"));
    }
    if kappa.len() + 1 != thresholds.len() {
        return Err(domain(format!(
            "{} thresholds need {} tuning parameters, got {}",
            thresholds.len(),
            thresholds.len() - 1,
            kappa.len()
        )));
    }
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(domain(
            "KPR transition rates need finite interior thresholds",
        ));
    }
    if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("thresholds must be strictly increasing"));
    }
    if kappa.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(domain("tuning parameters must be positive"));
    }
    let beta = thresholds
        .windows(2)
        .zip(kappa)
        .map(|(w, k)| k / (w[1] - w[0]))
        .collect();
    Ok(KprScheme {
        beta,
        kappa: kappa.to_vec(),
        thresholds: thresholds.to_vec(),
    })
}

/// `P(D_j | k⁻)`: probability that a ligand with unbinding rate `k⁻`
/// leaves from substate `j`.
pub fn kpr_absorption(scheme: &KprScheme, rate: f64) -> Vec<f64> {
    let m = scheme.substates();
    let mut out = Vec::with_capacity(m);
    let mut reach = 1.0;
    for b in &scheme.beta {
        out.push(reach * rate / (b + rate));
        reach *= b / (b + rate);
    }
    out.push(reach);
    out
}

/// Gaussian approximation of one messenger count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountGaussian {
    pub probability: f64,
    pub mean: f64,
    pub variance: f64,
}

impl CountGaussian {
    pub fn from_probability(p: f64, receptors: u64) -> Self {
        let n = receptors as f64;
        Self {
            probability: p,
            mean: n * p,
            variance: n * p * (1.0 - p),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if self.variance <= 0.0 {
            return if x == self.mean { f64::INFINITY } else { 0.0 };
        }
        let z = (x - self.mean).powi(2) / (2.0 * self.variance);
        (-z).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }
}

/// `P_{D_j} = Σ_i α_i P(D_j | k⁻_i)`.
pub fn kpr_mixture_probabilities(ratios: &[f64], rates: &[f64], scheme: &KprScheme) -> Vec<f64> {
    let mut p = vec![0.0; scheme.substates()];
    for (a, k) in ratios.iter().zip(rates) {
        for (pj, q) in p.iter_mut().zip(kpr_absorption(scheme, *k)) {
            *pj += a * q;
        }
    }
    p
}

/// Binomial mean and variance of each `n_{D_j}` over `receptors` receptors.
pub fn kpr_mixture_stats(
    mix: &LigandMixture,
    scheme: &KprScheme,
    receptors: u64,
) -> Vec<CountGaussian> {
    if receptors < GAUSSIAN_MIN_RECEPTORS {
        log::warn!("Gaussian approximation is poor for {receptors} receptors");
    }
    kpr_mixture_probabilities(mix.ratios(), mix.unbinding_rates(), scheme)
        .into_iter()
        .map(|p| CountGaussian::from_probability(p, receptors))
        .collect()
}

/// Messenger counts accumulated over a batch of receptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessengerCounts {
    pub n_d: Vec<u64>,
    pub n_s: u64,
    pub receptors: u64,
    pub production_rate: f64,
}

/// Per-receptor draws behind a [`MessengerCounts`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReceptorTrace {
    pub counts: MessengerCounts,
    /// Unbound time and total bound time of every receptor.
    pub observations: ObservationSet,
    pub ligands: Vec<usize>,
}

struct Walker {
    sampler: DwellSampler,
    advance: Vec<f64>,
    rates: Vec<f64>,
    production_rate: f64,
}

struct Step {
    unbound: f64,
    messengers: u64,
    ligand: usize,
    bound: f64,
    exit: usize,
}

impl Walker {
    fn new(mix: &LigandMixture, scheme: &KprScheme, production_rate: f64) -> Self {
        Self {
            sampler: DwellSampler::new(mix),
            advance: scheme.beta.clone(),
            rates: mix.unbinding_rates().to_vec(),
            production_rate,
        }
    }

    fn step(&self, rng: &mut SimRng) -> Step {
        let unbound = self.sampler.draw_unbound(rng);
        let lambda = self.production_rate * unbound;
        let messengers = if lambda > 0.0 {
            Poisson::new(lambda).expect("positive mean").sample(rng) as u64
        } else {
            0
        };
        let ligand = self.sampler.draw_ligand(rng);
        let k = self.rates[ligand];
        let mut bound = 0.0;
        let mut exit = 0;
        loop {
            if exit == self.advance.len() {
                bound += Exp::new(k).expect("positive rate").sample(rng);
                break;
            }
            let total = self.advance[exit] + k;
            bound += Exp::new(total).expect("positive rate").sample(rng);
            if rng.random::<f64>() * total < k {
                break;
            }
            exit += 1;
        }
        Step {
            unbound,
            messengers,
            ligand,
            bound,
            exit,
        }
    }
}

fn check_inputs(
    mix: &LigandMixture,
    scheme: &KprScheme,
    production_rate: f64,
    receptors: usize,
) -> Result<()> {
    if scheme.substates() != mix.len() {
        return Err(domain(format!(
            "{} substates for {} ligand types",
            scheme.substates(),
            mix.len()
        )));
    }
    if !(production_rate > 0.0 && production_rate.is_finite()) {
        return Err(domain("production rate must be positive"));
    }
    if receptors == 0 {
        return Err(domain("at least one receptor is required"));
    }
    Ok(())
}

fn chunks(receptors: usize) -> Vec<(u64, usize)> {
    (0..receptors.div_ceil(RECEPTOR_CHUNK))
        .map(|c| (c as u64, RECEPTOR_CHUNK.min(receptors - c * RECEPTOR_CHUNK)))
        .collect()
}

/// Simulates one binding cycle on each of `receptors` independent
/// receptors. Deterministic in `seed` regardless of thread count.
pub fn simulate_receptors(
    mix: &LigandMixture,
    scheme: &KprScheme,
    production_rate: f64,
    receptors: usize,
    seed: u64,
) -> Result<MessengerCounts> {
    check_inputs(mix, scheme, production_rate, receptors)?;
    let walker = Walker::new(mix, scheme, production_rate);
    let m = scheme.substates();
    let parts: Vec<(Vec<u64>, u64)> = chunks(receptors)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = rng::stream(seed, c);
            let mut n_d = vec![0u64; m];
            let mut n_s = 0;
            for _ in 0..len {
                let s = walker.step(&mut rng);
                n_d[s.exit] += 1;
                n_s += s.messengers;
            }
            (n_d, n_s)
        })
        .collect();
    let mut n_d = vec![0u64; m];
    let mut n_s = 0;
    for (d, s) in parts {
        n_d.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        n_s += s;
    }
    Ok(MessengerCounts {
        n_d,
        n_s,
        receptors: receptors as u64,
        production_rate,
    })
}

/// Like [`simulate_receptors`], also returning the dwell times and ligand
/// types. Consumes the generators identically, so both give the same
/// counts for the same seed.
pub fn simulate_receptors_traced(
    mix: &LigandMixture,
    scheme: &KprScheme,
    production_rate: f64,
    receptors: usize,
    seed: u64,
) -> Result<ReceptorTrace> {
    check_inputs(mix, scheme, production_rate, receptors)?;
    let walker = Walker::new(mix, scheme, production_rate);
    let m = scheme.substates();
    let parts: Vec<Vec<Step>> = chunks(receptors)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = rng::stream(seed, c);
            (0..len).map(|_| walker.step(&mut rng)).collect()
        })
        .collect();
    let mut n_d = vec![0u64; m];
    let mut n_s = 0;
    let mut total_unbound_time = 0.0;
    let mut bound = Vec::with_capacity(receptors);
    let mut ligands = Vec::with_capacity(receptors);
    for s in parts.into_iter().flatten() {
        n_d[s.exit] += 1;
        n_s += s.messengers;
        total_unbound_time += s.unbound;
        bound.push(s.bound);
        ligands.push(s.ligand);
    }
    let mut observations = ObservationSet::new(total_unbound_time, bound)?;
    observations.seed = Some(seed);
    Ok(ReceptorTrace {
        counts: MessengerCounts {
            n_d,
            n_s,
            receptors: receptors as u64,
            production_rate,
        },
        observations,
        ligands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn default_mix() -> LigandMixture {
        LigandMixture::uniform(1.0, vec![25.0, 5.0, 1.0], 1.0).unwrap()
    }

    fn default_scheme() -> KprScheme {
        let rates = [25.0, 5.0, 1.0];
        KprScheme::from_scheme(
            &ThresholdScheme::from_rates(&rates, 3.0).unwrap(),
            DEFAULT_KAPPA,
        )
        .unwrap()
    }

    #[test]
    fn rates_from_thresholds() {
        let s = kpr_rates(&[0.0, 0.6], &[0.6]).unwrap();
        assert!((s.beta[0] - 1.0).abs() < 1e-15);
        let d = default_scheme();
        assert!((d.beta[0] - 5.0).abs() < 1e-12);
        assert!((d.beta[1] - 1.25).abs() < 1e-12);
        let twice = d.scaled(2.0).unwrap();
        for (a, b) in twice.beta.iter().zip(&d.beta) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
        assert!(kpr_rates(&[0.0, f64::INFINITY], &[0.6]).is_err());
        assert!(kpr_rates(&[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn absorption_closed_forms() {
        let single = KprScheme {
            beta: vec![],
            kappa: vec![],
            thresholds: vec![0.0],
        };
        assert_eq!(kpr_absorption(&single, 3.0), vec![1.0]);
        let s = default_scheme();
        let (b1, b2) = (s.beta[0], s.beta[1]);
        for k in [25.0, 5.0, 1.0, 0.01] {
            let p = kpr_absorption(&s, k);
            assert!((p[0] - k / (b1 + k)).abs() < 1e-15);
            assert!((p[1] - b1 * k / ((b1 + k) * (b2 + k))).abs() < 1e-15);
            assert!((p[2] - b1 * b2 / ((b1 + k) * (b2 + k))).abs() < 1e-15);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn absorption_matches_fundamental_matrix() {
        let s = kpr_rates(&[0.0, 0.1, 0.3, 0.7, 1.5], &[0.3, 0.6, 0.9, 1.2]).unwrap();
        let k = 2.5;
        let m = s.substates();
        // jump-chain transient block Q and absorbing block B
        let mut q = DMatrix::zeros(m, m);
        let mut b = DMatrix::zeros(m, m);
        for j in 0..m {
            let adv = s.beta.get(j).copied().unwrap_or(0.0);
            if j + 1 < m {
                q[(j, j + 1)] = adv / (adv + k);
            }
            b[(j, j)] = k / (adv + k);
        }
        let fundamental = (DMatrix::identity(m, m) - q).try_inverse().unwrap();
        let absorb = fundamental * b;
        let p = kpr_absorption(&s, k);
        for j in 0..m {
            assert!((absorb[(0, j)] - p[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_stats_conserve_receptors() {
        let stats = kpr_mixture_stats(&default_mix(), &default_scheme(), 10_000);
        let total: f64 = stats.iter().map(|g| g.mean).sum();
        assert!((total - 10_000.0).abs() < 1e-9);
        let pure = LigandMixture::new(1.0, vec![25.0, 5.0, 1.0], vec![0.0, 1.0, 0.0], 1.0).unwrap();
        let single = kpr_absorption(&default_scheme(), 5.0);
        for (g, p) in kpr_mixture_stats(&pure, &default_scheme(), 100)
            .iter()
            .zip(single)
        {
            assert!((g.probability - p).abs() < 1e-15);
        }
    }

    #[test]
    fn simulation_is_deterministic_and_conserving() {
        let a = simulate_receptors(&default_mix(), &default_scheme(), 1.0, 10_000, 9).unwrap();
        let b = simulate_receptors(&default_mix(), &default_scheme(), 1.0, 10_000, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_d.iter().sum::<u64>(), 10_000);
        let traced =
            simulate_receptors_traced(&default_mix(), &default_scheme(), 1.0, 10_000, 9).unwrap();
        assert_eq!(traced.counts, a);
        assert_eq!(traced.observations.samples(), 10_000);
    }

    #[test]
    fn single_substate_absorbs_everything() {
        let mix = LigandMixture::uniform(1.0, vec![2.0], 1.0).unwrap();
        let s = kpr_rates(&[0.0], &[]).unwrap();
        let c = simulate_receptors(&mix, &s, 1.0, 500, 1).unwrap();
        assert_eq!(c.n_d, vec![500]);
    }
}
