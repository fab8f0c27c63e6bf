//! Flat-kernel mean-shift clustering.

use crate::error::{domain, Result};

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

const MAX_ITERATIONS: usize = 300;

/// Moves every point to the mean of the data within `bandwidth` until it
/// settles, then gives points whose modes lie within `bandwidth / 2` the
/// same label. Labels are zero-based in order of first appearance.
pub fn mean_shift(points: &[Vec<f64>], bandwidth: f64) -> Result<Vec<usize>> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(domain(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let h2 = bandwidth * bandwidth;
    let tol2 = (1e-3 * bandwidth).powi(2);
    let mut centres: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::with_capacity(points.len());
    for start in points {
        let mut x = start.clone();
        for _ in 0..MAX_ITERATIONS {
            let mut sum = vec![0.0; x.len()];
            let mut n = 0usize;
            for p in points {
                if dist2(p, &x) <= h2 {
                    n += 1;
                    sum.iter_mut().zip(p).for_each(|(s, v)| *s += v);
                }
            }
            let next: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
            let moved = dist2(&next, &x);
            x = next;
            if moved < tol2 {
                break;
            }
        }
        let label = match centres.iter().position(|c| dist2(c, &x) <= h2 / 4.0) {
            Some(k) => k,
            None => {
                centres.push(x);
                centres.len() - 1
            }
        };
        labels.push(label);
    }
    Ok(labels)
}

/// Mean distance from each point to its `quantile * n`-th nearest
/// neighbour.
pub fn estimate_bandwidth(points: &[Vec<f64>], quantile: f64) -> Result<f64> {
    if points.len() < 2 || !(quantile > 0.0 && quantile <= 1.0) {
        return Err(domain(
            "bandwidth estimate needs two points and a quantile in (0, 1]",
        ));
    }
    let k = ((points.len() as f64 * quantile) as usize).clamp(1, points.len() - 1);
    let mut total = 0.0;
    let mut d = Vec::with_capacity(points.len());
    for p in points {
        d.clear();
        d.extend(points.iter().map(|q| dist2(p, q)));
        d.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
        total += d[k].sqrt();
    }
    Ok(total / points.len() as f64)
}
