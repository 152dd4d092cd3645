//! Mean-field chemical reaction network computing the unbiased estimate
//! from messenger counts.
//!
//! Reactions: `D_j → D_j + Y_i` at rate `w_ij` and `S + Y_i → S` at rate
//! `k⁺`, giving `dn_Y/dt = W·n_D − k⁺·n_S·n_Y`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimators::{
    bin_counts, estimate_from_counts, ConcentrationEstimate, EstimatorKind, EstimatorMatrices,
    ThresholdScheme, DEFAULT_NU_UNBIASED,
};
use crate::kinetics::LigandMixture;
use crate::kpr::{simulate_receptors_traced, KprScheme, MessengerCounts, DEFAULT_KAPPA};
use crate::linalg::to_vec;

/// Largest admissible `dt·k⁺·n_S` for the integrator.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Inputs of the reaction network. `Y` starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CrnSpec {
    pub weights: DMatrix<f64>,
    pub binding_rate: f64,
    pub production_rate: f64,
    pub n_d: Vec<f64>,
    pub n_s: f64,
}

impl CrnSpec {
    pub fn new(
        weights: DMatrix<f64>,
        binding_rate: f64,
        production_rate: f64,
        n_d: Vec<f64>,
        n_s: f64,
    ) -> Result<Self> {
        if !(binding_rate > 0.0) {
            return Err(domain("binding rate must be positive"));
        }
        if !(production_rate > 0.0) {
            return Err(domain("production rate must be positive"));
        }
        if weights.ncols() != n_d.len() {
            return Err(domain(format!(
                "{} weight columns for {} D species",
                weights.ncols(),
                n_d.len()
            )));
        }
        if n_d.iter().any(|d| !(*d >= 0.0)) || !(n_s >= 0.0) {
            return Err(domain("messenger counts must be non-negative"));
        }
        Ok(Self {
            weights,
            binding_rate,
            production_rate,
            n_d,
            n_s,
        })
    }

    /// Whether any production rate is negative, which no physical
    /// reaction can realize.
    pub fn has_negative_weights(&self) -> bool {
        self.weights.iter().any(|w| *w < 0.0)
    }

    fn production(&self) -> DVector<f64> {
        &self.weights * DVector::from_column_slice(&self.n_d)
    }
}

/// `n_Y = W·n_D / (k⁺·n_S)`.
pub fn crn_steady_state(
    n_d: &[f64],
    n_s: f64,
    weights: &DMatrix<f64>,
    binding_rate: f64,
) -> Result<Vec<f64>> {
    if !(n_s > 0.0) {
        return Err(Error::NoUnboundSignal);
    }
    if weights.ncols() != n_d.len() {
        return Err(domain("weight matrix and D counts disagree in size"));
    }
    let y = weights * DVector::from_column_slice(n_d) / (binding_rate * n_s);
    Ok(to_vec(&y))
}

/// Sampled solution of the rate equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrnTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl CrnTrajectory {
    pub fn last(&self) -> &[f64] {
        self.states
            .last()
            .expect("a trajectory holds the initial state")
    }
}

/// Fixed-step classical Runge–Kutta integration from `n_Y = 0`.
pub fn crn_integrate(spec: &CrnSpec, t_end: f64, dt: f64) -> Result<CrnTrajectory> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(domain("need dt > 0 and t_end ≥ 0"));
    }
    let decay = spec.binding_rate * spec.n_s;
    if dt * decay >= STABILITY_LIMIT {
        return Err(domain(format!(
            "dt·k⁺·n_S = {} exceeds {STABILITY_LIMIT}; use dt < {}",
            dt * decay,
            STABILITY_LIMIT / decay
        )));
    }
    let source = spec.production();
    let rhs = |y: &DVector<f64>| &source - y * decay;
    let steps = (t_end / dt).ceil() as usize;
    let mut y = DVector::zeros(spec.weights.nrows());
    let mut times = vec![0.0];
    let mut states = vec![to_vec(&y)];
    let mut t = 0.0;
    for s in 0..steps {
        let h = if s + 1 == steps { t_end - t } else { dt };
        let k1 = rhs(&y);
        let k2 = rhs(&(&y + &k1 * (h / 2.0)));
        let k3 = rhs(&(&y + &k2 * (h / 2.0)));
        let k4 = rhs(&(&y + &k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
        times.push(t);
        states.push(to_vec(&y));
    }
    Ok(CrnTrajectory { times, states })
}

/// Settings of the receptor-to-network pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenseConfig {
    pub nu: f64,
    pub kappa: f64,
    pub production_rate: f64,
    pub receptors: usize,
}

impl Default for SenseConfig {
    fn default() -> Self {
        Self {
            nu: DEFAULT_NU_UNBIASED,
            kappa: DEFAULT_KAPPA,
            production_rate: 1.0,
            receptors: 10_000,
        }
    }
}

/// Output of one sensing round.
#[derive(Debug, Clone, PartialEq)]
pub struct SenseOutcome {
    /// `μ·n_Y`, the network's concentration estimate.
    pub crn: ConcentrationEstimate,
    /// Unbiased estimate from the same receptors' dwell times.
    pub software: ConcentrationEstimate,
    pub counts: MessengerCounts,
    pub n_y: Vec<f64>,
    pub negative_weights: bool,
}

/// Runs receptors through the KPR scheme, feeds the messenger counts to
/// the network at steady state, and computes the software estimate from
/// the same trajectories.
pub fn end_to_end_sense(
    mix: &LigandMixture,
    config: &SenseConfig,
    seed: u64,
) -> Result<SenseOutcome> {
    let scheme = ThresholdScheme::from_rates(mix.unbinding_rates(), config.nu)?;
    let matrices = EstimatorMatrices::new(&scheme, mix.unbinding_rates())?;
    let kpr = KprScheme::from_scheme(&scheme, config.kappa)?;
    let trace =
        simulate_receptors_traced(mix, &kpr, config.production_rate, config.receptors, seed)?;
    let counts = trace.counts;
    let n_d: Vec<f64> = counts.n_d.iter().map(|c| *c as f64).collect();
    let n_y = crn_steady_state(&n_d, counts.n_s as f64, &matrices.w, mix.binding_rate())?;

    let n = counts.receptors as f64;
    let total = config.production_rate * n / (mix.binding_rate() * counts.n_s as f64);
    let ratios = to_vec(&(&matrices.w * DVector::from_column_slice(&n_d) / n));
    let crn = ConcentrationEstimate::new(
        EstimatorKind::Crn,
        total,
        ratios,
        counts.receptors,
        counts.receptors,
    );

    let binned = bin_counts(&trace.observations, &scheme);
    let software = estimate_from_counts(
        EstimatorKind::Unbiased,
        trace.observations.total_unbound_time,
        binned.total,
        &binned.counts,
        &matrices,
        mix.binding_rate(),
    )?;
    Ok(SenseOutcome {
        crn,
        software,
        counts,
        n_y,
        negative_weights: matrices.w.iter().any(|w| *w < 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> CrnSpec {
        let w = DMatrix::from_row_slice(2, 2, &[1.5, -0.5, -0.2, 1.2]);
        CrnSpec::new(w, 1.0, 1.0, vec![600.0, 400.0], 1000.0).unwrap()
    }

    #[test]
    fn steady_state_identities() {
        let w = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(crn_steady_state(&[50.0], 10.0, &w, 2.0).unwrap(), vec![2.5]);
        assert_eq!(crn_steady_state(&[0.0], 10.0, &w, 2.0).unwrap(), vec![0.0]);
        assert_eq!(
            crn_steady_state(&[1.0], 0.0, &w, 2.0),
            Err(Error::NoUnboundSignal)
        );
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let s = spec();
        let y = crn_steady_state(&s.n_d, s.n_s, &s.weights, s.binding_rate).unwrap();
        let residual = s.production() - DVector::from_vec(y.clone()) * (s.binding_rate * s.n_s);
        let scale = s.production().amax();
        assert!(residual.amax() <= 1e-12 * scale);
    }

    #[test]
    fn linear_in_d() {
        let s = spec();
        let a = crn_steady_state(&[1.0, 0.0], 7.0, &s.weights, 1.0).unwrap();
        let b = crn_steady_state(&[0.0, 1.0], 7.0, &s.weights, 1.0).unwrap();
        let ab = crn_steady_state(&[3.0, 2.0], 7.0, &s.weights, 1.0).unwrap();
        for i in 0..2 {
            assert!((ab[i] - 3.0 * a[i] - 2.0 * b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn integration_converges() {
        let s = spec();
        let decay = s.binding_rate * s.n_s;
        let t_end = 10.0 / decay;
        let traj = crn_integrate(&s, t_end, 0.05 / decay).unwrap();
        assert!(traj.states[0].iter().all(|y| *y == 0.0));
        let ss = crn_steady_state(&s.n_d, s.n_s, &s.weights, s.binding_rate).unwrap();
        for (y, e) in traj.last().iter().zip(&ss) {
            assert!(((y - e) / e).abs() < 1e-3);
        }
        let fine = crn_integrate(&s, t_end, 0.025 / decay).unwrap();
        for (a, b) in traj.last().iter().zip(fine.last()) {
            assert!(((a - b) / b).abs() < 1e-6);
        }
        assert!((traj.times.last().unwrap() - t_end).abs() < 1e-15);
    }

    #[test]
    fn unstable_step_rejected() {
        let s = spec();
        assert!(crn_integrate(&s, 1.0, 0.1 / 1000.0).is_err());
    }

    #[test]
    fn pipeline_runs() {
        let mix = LigandMixture::uniform(1.0, vec![25.0, 5.0, 1.0], 1.0).unwrap();
        let out = end_to_end_sense(&mix, &SenseConfig::default(), 3).unwrap();
        assert!(out.negative_weights);
        for (y, c) in out.n_y.iter().zip(&out.crn.concentrations) {
            assert!((y - c).abs() < 1e-12);
        }
        assert_eq!(out.counts.n_d.iter().sum::<u64>(), 10_000);
    }
}
