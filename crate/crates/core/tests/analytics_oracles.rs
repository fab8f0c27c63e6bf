//! Independent oracles for the determinantal transform and its inversion.

use std::f64::consts::PI;

use ambiscatter::analytics::{
    invert_to_pdf_cdf, loads_from_specs, AnalyticEngine, FredholmGrid, LinkBudget, PatternKernel,
    Talbot, DEFAULT_NODES,
};
use ambiscatter::bnp::DEFAULT_LINK_RATE;
use ambiscatter::quad::gauss_legendre;
use ambiscatter::simcore::{incident_power_samples, mc_metrics, SimConfig};
use ambiscatter::traffic::PatternSpec;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues of the thinned, multiplied Ginibre kernel from a dense polar
/// Nystrom discretization of the disk.
fn dense_eigenvalues(
    zeta: f64,
    radius: f64,
    s: Complex64,
    kernel: &PatternKernel,
) -> Vec<Complex64> {
    let (rx, rw) = gauss_legendre(28);
    let angles = 32;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (x, w) in rx.iter().zip(&rw) {
        let r = 0.5 * radius * (x + 1.0);
        for j in 0..angles {
            let theta = 2.0 * PI * j as f64 / angles as f64;
            nodes.push(Complex64::from_polar(r, theta));
            weights.push(0.5 * radius * w * r * 2.0 * PI / angles as f64);
        }
    }
    let n = nodes.len();
    let scale: Vec<Complex64> = nodes
        .iter()
        .zip(&weights)
        .map(|(z, w)| {
            let sp = s * kernel.p_k;
            (sp / (sp + z.norm().powf(kernel.mu)) * kernel.portion * *w).sqrt()
        })
        .collect();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let (x, y) = (nodes[i], nodes[j]);
        let k = zeta * (PI * zeta * (x * y.conj() - 0.5 * (x.norm_sqr() + y.norm_sqr()))).exp();
        scale[i] * k * scale[j]
    });
    // Hermitian for real s.
    let mut eig: Vec<Complex64> = if s.im == 0.0 {
        a.symmetric_eigenvalues()
            .iter()
            .map(|v| Complex64::new(*v, 0.0))
            .collect()
    } else {
        a.schur()
            .eigenvalues()
            .expect("complex Schur yields eigenvalues")
            .iter()
            .copied()
            .collect()
    };
    eig.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    eig
}

#[test]
fn mode_eigenvalues_match_dense_nystrom() {
    let (zeta, radius) = (1.0 / PI, 2.2);
    let grid = FredholmGrid::new(zeta, radius).unwrap();
    let kernel = PatternKernel {
        portion: 0.6,
        p_k: 1.0,
        mu: 4.0,
    };
    for s in [
        Complex64::new(0.3, 0.0),
        Complex64::new(20.0, 0.0),
        Complex64::new(1.0, 2.0),
    ] {
        let mut modes = grid.eigenvalues(s, &kernel).unwrap();
        modes.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        let dense = dense_eigenvalues(zeta, radius, s, &kernel);
        for (i, (a, b)) in modes.iter().zip(&dense).take(12).enumerate() {
            assert!((a - b).norm() < 1e-6, "s = {s}, eigenvalue {i}: {a} vs {b}");
        }
    }
}

fn voip_engine_and_config() -> (AnalyticEngine, SimConfig) {
    let loads = loads_from_specs(&PatternSpec::reference_set(), 0.03, DEFAULT_LINK_RATE);
    let config = SimConfig::new(
        LinkBudget::default(),
        4.0,
        -1.0,
        loads.iter().map(|l| l.zeta_k).collect(),
        loads.iter().map(|l| l.p_b).collect(),
    );
    (AnalyticEngine::new(LinkBudget::default()).unwrap(), config)
}

#[test]
fn ginibre_transform_and_cdf_match_monte_carlo() {
    let (engine, config) = voip_engine_and_config();
    let loads = loads_from_specs(&PatternSpec::reference_set(), 0.03, DEFAULT_LINK_RATE);
    let power = engine.incident_power(-1.0, 4.0, 0.03, loads[0]).unwrap();
    let mut samples = incident_power_samples(&config, 0, 100_000, 77).unwrap();
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;

    // Transform at the scale of the quartiles.
    for q in [0.25, 0.5, 0.75] {
        let s = 1.0 / samples[(q * n) as usize];
        let e: Vec<f64> = samples.iter().map(|p| (-s * p).exp()).collect();
        let mean = e.iter().sum::<f64>() / n;
        let se = (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let analytic = power.laplace(Complex64::new(s, 0.0)).unwrap().re;
        assert!(
            (analytic - mean).abs() < 3.0 * se,
            "s = {s}: {analytic} vs {mean} +- {se}"
        );
    }

    // Kolmogorov-Smirnov distance evaluated at 999 empirical quantiles; the
    // grid spacing adds at most 1e-3 to the true supremum.
    let idx: Vec<usize> = (1..1000)
        .map(|i| (i as f64 * n / 1000.0) as usize)
        .collect();
    let grid: Vec<f64> = idx.iter().map(|i| samples[*i]).collect();
    let dist = invert_to_pdf_cdf(&power, &grid, engine.talbot()).unwrap();
    let ks = idx
        .iter()
        .zip(&dist.cdf)
        .map(|(i, f)| {
            (f - *i as f64 / n)
                .abs()
                .max((f - (*i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks + 1e-3 < 0.01, "KS distance {ks}");
}

#[test]
fn exhaustive_selection_matches_monte_carlo_argmax() {
    let loads = loads_from_specs(&PatternSpec::reference_set(), 0.03, DEFAULT_LINK_RATE);
    let engine = AnalyticEngine::new(LinkBudget::default()).unwrap();
    let analytic = engine.scenario(0.0, 4.0, &loads).unwrap();
    let config = SimConfig::new(
        LinkBudget::default(),
        4.0,
        0.0,
        loads.iter().map(|l| l.zeta_k).collect(),
        loads.iter().map(|l| l.p_b).collect(),
    );
    let mc = mc_metrics(&config, 100_000, 5).unwrap();
    let best = (0..mc.len())
        .max_by(|a, b| mc[*a].coverage.total_cmp(&mc[*b].coverage))
        .unwrap();
    assert_eq!(analytic.by_exhaustive.index, best);
}

#[test]
fn metrics_insensitive_to_window_doubling() {
    let loads = loads_from_specs(&PatternSpec::reference_set(), 0.03, DEFAULT_LINK_RATE);
    let near = AnalyticEngine::new(LinkBudget::default()).unwrap();
    let far = AnalyticEngine::with_options(
        LinkBudget::default(),
        200.0,
        Talbot::new(DEFAULT_NODES).unwrap(),
    )
    .unwrap();
    let a = near.scenario(-1.0, 4.0, &loads).unwrap();
    let b = far.scenario(-1.0, 4.0, &loads).unwrap();
    for (x, y) in a.patterns.iter().zip(&b.patterns) {
        assert!((x.outage / y.outage - 1.0).abs() < 5e-3, "{x:?} vs {y:?}");
        assert!(
            (x.coverage / y.coverage - 1.0).abs() < 5e-3,
            "{x:?} vs {y:?}"
        );
    }
}
