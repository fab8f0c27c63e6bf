//! Traffic-pattern learning: a Dirichlet-process Gaussian mixture fitted by
//! collapsed Gibbs sampling, a mean-shift baseline, and the per-pattern
//! network parameters.

mod crp;
mod gibbs;
mod mean_shift;
mod network;
mod niw;

pub use crp::{crp_ln_prob, crp_prior, finite_mixture_ln_prob, sequential_ln_prob};
pub use gibbs::{
    escobar_west, gibbs_sweep, run_chain, ChainConfig, ChainResult, ClusterState, GibbsOptions,
    GibbsSampler, InitialPartition, SweepDiagnostics,
};
pub use mean_shift::{estimate_bandwidth, mean_shift};
pub use network::{estimate_network_params, TrafficPattern, DEFAULT_LINK_RATE};
pub use niw::{
    ln_marginal_likelihood, posterior_predictive, NiwHyperparams, NiwPosterior, Predictive,
    SuffStats,
};

use crate::traffic::ObservationMatrix;

/// Assigns each PU the most frequent label among its observations
/// (smallest label on ties). `point_labels` follow
/// [`ObservationMatrix::feature_points`] order.
pub fn majority_vote(point_labels: &[usize], pus: usize, rows: usize) -> Vec<usize> {
    (0..pus)
        .map(|pu| {
            let slice = &point_labels[pu * rows..(pu + 1) * rows];
            let mut counts = vec![0usize; slice.iter().max().map_or(0, |m| m + 1)];
            slice.iter().for_each(|l| counts[*l] += 1);
            let best = counts.iter().max().copied().unwrap_or(0);
            counts.iter().position(|c| *c == best).unwrap_or(0)
        })
        .collect()
}

/// Relabels so labels are `0..K` in order of first appearance.
pub fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut s = ClusterState {
        labels: labels.to_vec(),
        concentration: 1.0,
        iteration: 0,
    };
    s.compact();
    s.labels
}

/// Feature triples of an observation matrix as owned vectors.
pub fn observation_points(matrix: &ObservationMatrix) -> Vec<Vec<f64>> {
    matrix.feature_points().iter().map(|p| p.to_vec()).collect()
}

/// Z-scores each feature dimension across all points. Constant dimensions
/// are centred but not scaled.
pub fn standardize_points(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(dim) = points.first().map(Vec::len) else {
        return Vec::new();
    };
    let n = points.len() as f64;
    let mut out = points.to_vec();
    for d in 0..dim {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for p in &mut out {
            p[d] = (p[d] - mean) / sd;
        }
    }
    out
}

/// Fraction of items labelled correctly under the best one-to-one matching
/// of predicted to true labels.
pub fn label_accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(
        predicted.len(),
        truth.len(),
        "label vectors differ in length"
    );
    if predicted.is_empty() {
        return 1.0;
    }
    let p = relabel(predicted);
    let t = relabel(truth);
    let kp = p.iter().max().map_or(0, |m| m + 1);
    let kt = t.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kt]; kp];
    for (a, b) in p.iter().zip(&t) {
        table[*a][*b] += 1;
    }
    // Maximum-weight matching by dynamic programming over subsets of the
    // smaller side.
    let (rows, cols, get): (usize, usize, Box<dyn Fn(usize, usize) -> usize>) = if kt <= kp {
        (kp, kt, Box::new(|i, j| table[i][j]))
    } else {
        (kt, kp, Box::new(|i, j| table[j][i]))
    };
    assert!(cols <= 20, "too many classes for exact matching");
    let mut best = vec![usize::MAX; 1 << cols];
    best[0] = 0;
    for i in 0..rows {
        let mut next = best.clone();
        for mask in 0..(1usize << cols) {
            if best[mask] == usize::MAX {
                continue;
            }
            for j in 0..cols {
                if mask & (1 << j) == 0 {
                    let m = mask | (1 << j);
                    let v = best[mask] + get(i, j);
                    if next[m] == usize::MAX || v > next[m] {
                        next[m] = v;
                    }
                }
            }
        }
        best = next;
    }
    let matched = best
        .iter()
        .filter(|v| **v != usize::MAX)
        .max()
        .copied()
        .unwrap_or(0);
    matched as f64 / predicted.len() as f64
}
