//! Primary-user locations in a disk window: Poisson, Ginibre and
//! alpha-Ginibre networks, and their split into traffic sub-patterns.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rand_distr::{Gamma, Poisson, StandardNormal};
use statrs::function::gamma::gamma_lr;

use crate::error::{domain, Result};

/// Kostlan moduli beyond `N_max` fall inside the window with probability
/// below this.
pub const MODE_TAIL: f64 = 1e-6;

/// Planar points (as complex numbers) inside a disk centred at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub points: Vec<Complex64>,
    /// Intensity in points per square metre.
    pub zeta: f64,
    /// Repulsion; 0 is the Poisson case.
    pub alpha: f64,
    pub window_radius: f64,
    /// Traffic index of each point once thinned.
    pub labels: Option<Vec<usize>>,
}

impl PointPattern {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points carrying traffic `k`. Empty when the pattern is unlabelled.
    pub fn with_label(&self, k: usize) -> impl Iterator<Item = Complex64> + '_ {
        let labels = self.labels.as_deref().unwrap_or(&[]);
        self.points
            .iter()
            .zip(labels)
            .filter(move |(_, l)| **l == k)
            .map(|(p, _)| *p)
    }

    /// Number of points within `radius` of the origin.
    pub fn count_within(&self, radius: f64) -> usize {
        self.points.iter().filter(|p| p.norm() <= radius).count()
    }

    /// Writes `x,y,label` rows; the label column is empty when unlabelled.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "label"])?;
        for (i, p) in self.points.iter().enumerate() {
            let label = self
                .labels
                .as_ref()
                .map(|l| l[i].to_string())
                .unwrap_or_default();
            w.write_record([p.re.to_string(), p.im.to_string(), label])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_window(zeta: f64, window_radius: f64) -> Result<()> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(domain(format!("intensity must be positive, got {zeta}")));
    }
    if !(window_radius > 0.0 && window_radius.is_finite()) {
        return Err(domain(format!(
            "window radius must be positive, got {window_radius}"
        )));
    }
    Ok(())
}

fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())
}

/// Homogeneous Poisson process on the disk.
pub fn sample_ppp<R: Rng + ?Sized>(
    zeta: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    check_window(zeta, window_radius)?;
    let mean = zeta * PI * window_radius * window_radius;
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| domain(format!("Poisson mean {mean}: {e}")))?
            .sample(rng) as usize
    } else {
        0
    };
    let points = (0..count)
        .map(|_| uniform_angle(rng) * window_radius * rng.random::<f64>().sqrt())
        .collect();
    Ok(PointPattern {
        points,
        zeta,
        alpha: 0.0,
        window_radius,
        labels: None,
    })
}

/// Smallest `n` with `P(Gamma(n, 1) <= pi zeta R^2) < MODE_TAIL`.
pub fn ginibre_mode_count(zeta: f64, window_radius: f64) -> usize {
    let total = PI * zeta * window_radius * window_radius;
    let mut n = total.floor().max(1.0) as usize;
    while gamma_lr(n as f64, total) >= MODE_TAIL {
        n += 1;
    }
    n
}

/// Kostlan construction: moduli `sqrt(G_n / (pi zeta))`, `G_n ~ Gamma(n, 1)`,
/// with independent uniform angles, each point kept with probability
/// `retention`.
fn push_kostlan<R: Rng + ?Sized>(
    zeta: f64,
    window_radius: f64,
    retention: f64,
    modes: usize,
    rng: &mut R,
    out: &mut Vec<Complex64>,
) {
    let r2_max = window_radius * window_radius;
    let scale = 1.0 / (PI * zeta);
    for n in 1..=modes {
        let g: f64 = Gamma::new(n as f64, 1.0)
            .expect("positive shape")
            .sample(rng);
        let r2 = g * scale;
        if r2 <= r2_max && (retention >= 1.0 || rng.random::<f64>() < retention) {
            out.push(uniform_angle(rng) * r2.sqrt());
        }
    }
}

/// Ginibre process of intensity `zeta` restricted to the window.
///
/// Exact for any functional of the point moduli (counts in centred disks,
/// radial interference sums). Angles are independent, so use
/// [`sample_ginibre_spectral`] when the joint positions matter.
pub fn sample_ginibre<R: Rng + ?Sized>(
    zeta: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    sample_alpha_gpp(zeta, -1.0, window_radius, rng)
}

/// Ginibre process from the eigenvalues of an `N_max x N_max` complex
/// Gaussian matrix. Reproduces the joint law of the first `N_max` modes,
/// including angular correlations, at cubic cost.
pub fn sample_ginibre_spectral<R: Rng + ?Sized>(
    zeta: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    check_window(zeta, window_radius)?;
    let n = ginibre_mode_count(zeta, window_radius);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let m = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * half
    });
    let scale = 1.0 / (PI * zeta).sqrt();
    let points = m
        .eigenvalues()
        .ok_or_else(|| crate::error::numerical("Schur decomposition did not converge"))?
        .iter()
        .map(|z| z * scale)
        .filter(|z| z.norm() <= window_radius)
        .collect();
    Ok(PointPattern {
        points,
        zeta,
        alpha: -1.0,
        window_radius,
        labels: None,
    })
}

/// Number of independent components for `alpha = -1/m`.
pub fn components_for(alpha: f64) -> Result<usize> {
    if !(alpha < 0.0 && alpha >= -1.0) {
        return Err(domain(format!("sampling needs alpha = -1/m, got {alpha}")));
    }
    let m = (-1.0 / alpha).round();
    if ((-1.0 / m) - alpha).abs() > 1e-12 * alpha.abs() {
        return Err(domain(format!(
            "sampling needs alpha = -1/m for integer m, got {alpha}"
        )));
    }
    Ok(m as usize)
}

/// alpha-Ginibre process with `alpha = -1/m`: the union of `m` independent
/// Ginibre processes of intensity `zeta`, each thinned to intensity
/// `zeta / m`. Its Laplace functional is `Det(I - K/m)^m` for the Ginibre
/// kernel `K`, which is the determinantal form used by the analysis.
pub fn sample_alpha_gpp<R: Rng + ?Sized>(
    zeta: f64,
    alpha: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    check_window(zeta, window_radius)?;
    let m = components_for(alpha)?;
    let modes = ginibre_mode_count(zeta, window_radius);
    let mut points = Vec::new();
    for _ in 0..m {
        push_kostlan(zeta, window_radius, 1.0 / m as f64, modes, rng, &mut points);
    }
    Ok(PointPattern {
        points,
        zeta,
        alpha,
        window_radius,
        labels: None,
    })
}

/// Draws a network for any supported repulsion; `alpha = 0` is Poisson.
pub fn sample_network<R: Rng + ?Sized>(
    zeta: f64,
    alpha: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    if alpha == 0.0 {
        sample_ppp(zeta, window_radius, rng)
    } else {
        sample_alpha_gpp(zeta, alpha, window_radius, rng)
    }
}

/// Checks that portions are non-negative and sum to one.
pub fn validate_portions(portions: &[f64]) -> Result<()> {
    let sum: f64 = portions.iter().sum();
    if portions.is_empty() || portions.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(domain(format!(
            "portions must be non-negative and sum to 1, got {portions:?}"
        )));
    }
    Ok(())
}

/// Labels every point independently with traffic `k` with probability
/// `portions[k]`.
pub fn thin_by_traffic<R: Rng + ?Sized>(
    mut pattern: PointPattern,
    portions: &[f64],
    rng: &mut R,
) -> Result<PointPattern> {
    validate_portions(portions)?;
    let chooser = WeightedIndex::new(portions).map_err(|e| domain(e.to_string()))?;
    let labels = (0..pattern.len()).map(|_| chooser.sample(rng)).collect();
    pattern.labels = Some(labels);
    Ok(pattern)
}
