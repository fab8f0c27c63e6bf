//! Chinese restaurant process prior over partitions.

use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};

/// Probability that the next customer joins each occupied table, followed by
/// the probability of a new table. `counts` exclude the customer.
pub fn crp_prior(counts: &[usize], concentration: f64) -> Result<Vec<f64>> {
    if !(concentration > 0.0) {
        return Err(domain(format!(
            "concentration must be positive, got {concentration}"
        )));
    }
    let n: usize = counts.iter().sum();
    let denom = n as f64 + concentration;
    let mut p: Vec<f64> = counts.iter().map(|m| *m as f64 / denom).collect();
    p.push(concentration / denom);
    Ok(p)
}

/// Log probability of a partition with the given block sizes under the
/// process, summed over label orderings.
pub fn crp_ln_prob(counts: &[usize], concentration: f64) -> f64 {
    let n: usize = counts.iter().sum();
    counts.len() as f64 * concentration.ln()
        + counts.iter().map(|m| ln_gamma(*m as f64)).sum::<f64>()
        + ln_gamma(concentration)
        - ln_gamma(concentration + n as f64)
}

/// Log probability of the same partition under a symmetric
/// Dirichlet(`concentration / components`) mixture with `components`
/// labels, summed over the labelings that induce it.
pub fn finite_mixture_ln_prob(counts: &[usize], concentration: f64, components: f64) -> f64 {
    let n: usize = counts.iter().sum();
    let a = concentration / components;
    // components! / (components - k)!
    let labelings: f64 = (0..counts.len())
        .map(|j| (components - j as f64).ln())
        .sum();
    labelings + ln_gamma(concentration) - ln_gamma(concentration + n as f64)
        + counts
            .iter()
            .map(|m| ln_gamma(*m as f64 + a) - ln_gamma(a))
            .sum::<f64>()
}

/// Log probability of a labeling when customers arrive in the given order,
/// computed by chaining the sequential conditionals.
pub fn sequential_ln_prob(labels: &[usize], order: &[usize], concentration: f64) -> f64 {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    let mut total = 0.0;
    for (i, &idx) in order.iter().enumerate() {
        let label = labels[idx];
        let denom = i as f64 + concentration;
        match seen.iter_mut().find(|(l, _)| *l == label) {
            Some((_, m)) => {
                total += (*m as f64 / denom).ln();
                *m += 1;
            }
            None => {
                total += (concentration / denom).ln();
                seen.push((label, 1));
            }
        }
    }
    total
}
