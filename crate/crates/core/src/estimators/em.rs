//! Expectation–maximization for the mixture weights of an exponential
//! mixture with known component rates.
//!
//! Too expensive for a cell; kept here as a maximum-likelihood reference
//! for the moment estimators.

use crate::error::{domain, Result};

/// Result of [`ml_ratio_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmOutcome {
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `Σ ln p(τ_b)` at the start of every iteration and at the final iterate.
    pub log_likelihood: Vec<f64>,
}

/// Maximizes `Σ ln Σ_j α_j k_j exp(-k_j τ_i)` over the simplex, starting
/// from uniform weights. Stops once `max |Δα| < tol`.
pub fn ml_ratio_oracle(
    bound_durations: &[f64],
    rates: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<EmOutcome> {
    let m = rates.len();
    if m < 2 {
        return Err(domain("the EM oracle needs at least two ligand types"));
    }
    if !(tol > 0.0) {
        return Err(domain("EM tolerance must be positive"));
    }
    if bound_durations.is_empty() {
        return Err(domain("EM needs at least one bound duration"));
    }
    if rates.iter().any(|k| !(*k > 0.0)) {
        return Err(domain("unbinding rates must be positive"));
    }
    let k_min = rates.iter().copied().fold(f64::INFINITY, f64::min);

    // Component densities rescaled by exp(k_min τ); the factor cancels in
    // the responsibilities and is restored in the log-likelihood.
    let densities: Vec<f64> = bound_durations
        .iter()
        .flat_map(|t| rates.iter().map(move |k| k * (-(k - k_min) * t).exp()))
        .collect();
    let offset: f64 = bound_durations.iter().map(|t| -k_min * t).sum();
    let n = bound_durations.len() as f64;

    let mut alpha = vec![1.0 / m as f64; m];
    let mut trace = Vec::new();
    let mut next = vec![0.0; m];
    for iteration in 1..=max_iter {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut ll = offset;
        for row in densities.chunks_exact(m) {
            let mix: f64 = row.iter().zip(&alpha).map(|(g, a)| g * a).sum();
            ll += mix.ln();
            for ((acc, g), a) in next.iter_mut().zip(row).zip(&alpha) {
                *acc += g * a / mix;
            }
        }
        trace.push(ll);
        next.iter_mut().for_each(|x| *x /= n);
        let step = next
            .iter()
            .zip(&alpha)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut alpha, &mut next);
        if step < tol {
            trace.push(log_likelihood(&densities, &alpha, offset));
            return Ok(EmOutcome {
                ratios: alpha,
                iterations: iteration,
                converged: true,
                log_likelihood: trace,
            });
        }
    }
    log::warn!("EM did not converge within {max_iter} iterations; returning last iterate");
    trace.push(log_likelihood(&densities, &alpha, offset));
    Ok(EmOutcome {
        ratios: alpha,
        iterations: max_iter,
        converged: false,
        log_likelihood: trace,
    })
}

fn log_likelihood(densities: &[f64], alpha: &[f64], offset: f64) -> f64 {
    offset
        + densities
            .chunks_exact(alpha.len())
            .map(|row| row.iter().zip(alpha).map(|(g, a)| g * a).sum::<f64>().ln())
            .sum::<f64>()
}
