//! Ancestor selection from normalized weights.

use super::config::Resampler;
use crate::rng::RngStream;

/// Ancestor indices for `weights`, which must sum to 1.
pub fn resample(kind: Resampler, weights: &[f64], rng: &mut RngStream) -> Vec<usize> {
    match kind {
        Resampler::Systematic => systematic(weights, rng),
        Resampler::Multinomial => multinomial(weights, rng),
    }
}

/// One uniform offset, `N` evenly spaced pointers.
pub fn systematic(weights: &[f64], rng: &mut RngStream) -> Vec<usize> {
    let n = weights.len();
    let u0 = rng.uniform();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for k in 0..n {
        let u = (u0 + k as f64) / n as f64;
        while u >= cum && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        let mut pick = j;
        while weights[pick] == 0.0 && pick > 0 {
            pick -= 1;
        }
        out.push(pick);
    }
    out
}

/// `N` independent categorical draws.
pub fn multinomial(weights: &[f64], rng: &mut RngStream) -> Vec<usize> {
    let n = weights.len();
    (0..n)
        .map(|_| {
            let u = rng.uniform();
            let mut cum = 0.0;
            for (j, &w) in weights.iter().enumerate() {
                cum += w;
                if u < cum {
                    return j;
                }
            }
            // rounding left a sliver above the total; take the last
            // particle with positive weight
            weights.iter().rposition(|&w| w > 0.0).unwrap_or(n - 1)
        })
        .collect()
}

/// `1 / sum w_i^2` of normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}
