//! Hilbert-space size and phonon-cutoff estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2^N Π_k (n_k + 1) and its base-2 logarithm. `cutoffs` holds either one
/// shared value or one per mode.
pub fn estimate_dimension(n_ions: usize, cutoffs: &[usize]) -> Result<(u128, f64)> {
    let per_mode: Vec<usize> = match cutoffs.len() {
        1 => vec![cutoffs[0]; n_ions],
        l if l == n_ions => cutoffs.to_vec(),
        l => return Err(Error::invalid(format!("{l} cutoffs for {n_ions} modes"))),
    };
    let log2 = n_ions as f64 + per_mode.iter().map(|&c| ((c + 1) as f64).log2()).sum::<f64>();
    let dim = super::basis::full_dimension(&per_mode).unwrap_or(u128::MAX);
    Ok((dim, log2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSuggestion {
    /// Estimated mean occupancy (√N g/δ_k)²; infinite for a resonant mode.
    pub mean_occupancy: f64,
    /// `None` when the mode is resonant and needs a manual cutoff.
    pub cutoff: Option<usize>,
}

/// P(X > n) for X ~ Poisson(mean), by summing the CDF.
pub fn poisson_tail(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut term = (-mean).exp();
    let mut cdf = term;
    for k in 1..=n {
        term *= mean / k as f64;
        cdf += term;
    }
    (1.0 - cdf).max(0.0)
}

/// Smallest n with P(X > n) ≤ target for X ~ Poisson(mean).
pub fn poisson_cutoff(mean: f64, target: f64) -> Result<usize> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain("target error must lie in (0, 1)".into()));
    }
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::Domain("mean occupancy must be finite and nonnegative".into()));
    }
    // upper tail computed from the pmf beyond n avoids cancellation in 1 − cdf
    let mut n = 0usize;
    loop {
        if tail_above(mean, n) <= target {
            return Ok(n);
        }
        n += 1;
    }
}

fn tail_above(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    // pmf at n+1 in log space, then sum the decaying series
    let k0 = n + 1;
    let ln_p = -mean + k0 as f64 * mean.ln() - ln_factorial(k0);
    let mut term = ln_p.exp();
    let mut sum: f64 = 0.0;
    let mut k = k0;
    while term > 1e-18 * sum.max(1e-300) || (k as f64) < mean {
        sum += term;
        k += 1;
        term *= mean / k as f64;
        if k > k0 + 100_000 {
            break;
        }
    }
    sum
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Per-mode cutoffs from the occupancy heuristic n̄_k = (√N g/δ_k)².
pub fn suggest_cutoffs(mode_freqs: &[f64], coupling: f64, target_error: f64) -> Result<Vec<CutoffSuggestion>> {
    let n = mode_freqs.len() as f64;
    mode_freqs
        .iter()
        .map(|&d| {
            if d == 0.0 {
                if coupling == 0.0 {
                    return Ok(CutoffSuggestion {
                        mean_occupancy: 0.0,
                        cutoff: Some(0),
                    });
                }
                return Ok(CutoffSuggestion {
                    mean_occupancy: f64::INFINITY,
                    cutoff: None,
                });
            }
            let mean = (n.sqrt() * coupling / d).powi(2);
            Ok(CutoffSuggestion {
                mean_occupancy: mean,
                cutoff: Some(poisson_cutoff(mean, target_error)?),
            })
        })
        .collect()
}
