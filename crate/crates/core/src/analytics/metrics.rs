//! Distribution of the incident power and the two performance metrics.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use statrs::function::erf::erfc;

use super::fredholm::{FredholmGrid, PatternKernel};
use super::link_budget::DerivedConstants;
use super::ppp::{laplace_pi_ppp, levy_pdf_cdf};
use super::talbot::Talbot;
use crate::error::{domain, numerical, Result};
use crate::quad;

/// Violations of [0, 1] or of monotonicity larger than this abort an
/// inversion; smaller ones are clipped and counted.
pub const CDF_TOLERANCE: f64 = 1e-6;

/// Law of the aggregate incident power `P_I^k` at the tag.
#[derive(Debug, Clone)]
pub enum IncidentPower {
    /// Thinned Poisson network over the whole plane (alpha -> 0).
    Poisson { mu: f64, a_mu: f64 },
    /// Thinned alpha-Ginibre network restricted to the observation window.
    Ginibre {
        grid: Arc<FredholmGrid>,
        alpha: f64,
        kernel: PatternKernel,
    },
}

impl IncidentPower {
    pub fn mu(&self) -> f64 {
        match self {
            Self::Poisson { mu, .. } => *mu,
            Self::Ginibre { kernel, .. } => kernel.mu,
        }
    }

    /// Levy scale when the law is the mu = 4 Poisson closed form.
    fn levy_scale(&self) -> Option<f64> {
        match self {
            Self::Poisson { mu, a_mu } if *mu == 4.0 => Some(*a_mu),
            _ => None,
        }
    }

    /// E[exp(-s P_I)].
    pub fn laplace(&self, s: Complex64) -> Result<Complex64> {
        match self {
            Self::Poisson { mu, a_mu } => laplace_pi_ppp(s, *mu, *a_mu),
            Self::Ginibre {
                grid,
                alpha,
                kernel,
            } => grid.laplace(s, *alpha, kernel),
        }
    }

    /// Distribution function at `rho` by contour inversion of `L(s) / s`.
    /// The raw value is returned; see [`invert_to_pdf_cdf`] for the checked
    /// version.
    pub fn cdf_raw(&self, rho: f64, talbot: &Talbot) -> Result<f64> {
        talbot.invert(rho, |s| Ok(self.laplace(s)? / s))
    }

    /// Density at `rho` by contour inversion of `L(s)`.
    pub fn pdf(&self, rho: f64, talbot: &Talbot) -> Result<f64> {
        talbot.invert(rho, |s| self.laplace(s))
    }

    /// Checked distribution function at a single point.
    pub fn cdf(&self, rho: f64, talbot: &Talbot) -> Result<f64> {
        let raw = self.cdf_raw(rho, talbot)?;
        check_unit_interval(raw, rho)
    }
}

fn check_unit_interval(v: f64, rho: f64) -> Result<f64> {
    if v < -CDF_TOLERANCE || v > 1.0 + CDF_TOLERANCE {
        return Err(numerical(format!(
            "inverted cdf {v} leaves [0, 1] by more than {CDF_TOLERANCE} at rho = {rho}"
        )));
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Samples of the inverted density and distribution function.
#[derive(Debug, Clone, Serialize)]
pub struct InvertedDistribution {
    pub rho: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Number of cdf samples clipped into [0, 1] or raised to restore
    /// monotonicity (each by at most [`CDF_TOLERANCE`]).
    pub corrections: usize,
    /// Largest such correction.
    pub worst_correction: f64,
}

/// Inverts the transform on a grid of positive `rho` values (any order).
pub fn invert_to_pdf_cdf(
    power: &IncidentPower,
    grid: &[f64],
    talbot: &Talbot,
) -> Result<InvertedDistribution> {
    if let Some(bad) = grid.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(domain(format!(
            "inversion grid must be positive, found {bad}"
        )));
    }
    let mut pdf = Vec::with_capacity(grid.len());
    let mut cdf = Vec::with_capacity(grid.len());
    for &rho in grid {
        pdf.push(power.pdf(rho, talbot)?);
        cdf.push(power.cdf_raw(rho, talbot)?);
    }

    let mut corrections = 0;
    let mut worst = 0.0f64;
    let mut worst_rho = f64::NAN;
    let mut note = |delta: f64, rho: f64, corrections: &mut usize| {
        if delta > 0.0 {
            *corrections += 1;
            if delta > worst {
                worst = delta;
                worst_rho = rho;
            }
        }
    };
    for (c, &rho) in cdf.iter_mut().zip(grid) {
        let clipped = c.clamp(0.0, 1.0);
        note((*c - clipped).abs(), rho, &mut corrections);
        *c = clipped;
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut running = 0.0f64;
    for &i in &order {
        if cdf[i] < running {
            note(running - cdf[i], grid[i], &mut corrections);
            cdf[i] = running;
        }
        running = cdf[i];
    }
    if worst > CDF_TOLERANCE {
        return Err(numerical(format!(
            "inverted cdf violates [0, 1] or monotonicity by {worst:.3e} at rho = {worst_rho}"
        )));
    }
    Ok(InvertedDistribution {
        rho: grid.to_vec(),
        pdf,
        cdf,
        corrections,
        worst_correction: worst,
    })
}

/// Probability that the harvested power stays below the activation
/// threshold, `F_{P_I}(P_low)`.
pub fn energy_outage(
    power: &IncidentPower,
    link: &DerivedConstants,
    talbot: &Talbot,
) -> Result<f64> {
    if let Some(a4) = power.levy_scale() {
        return Ok(levy_pdf_cdf(a4, link.p_low).1);
    }
    if matches!(power, IncidentPower::Poisson { a_mu, .. } if *a_mu == 0.0) {
        return Ok(1.0);
    }
    power.cdf(link.p_low, talbot)
}

/// Probability that the energy, interference and SNR constraints all hold.
pub fn coverage(power: &IncidentPower, link: &DerivedConstants, talbot: &Talbot) -> Result<f64> {
    if !link.has_operating_window() {
        return Ok(0.0);
    }
    if let Some(a4) = power.levy_scale() {
        return Ok(coverage_levy(a4, link));
    }
    coverage_by_quadrature(power, link, talbot)
}

/// Closed-form coverage for the mu = 4 Poisson case.
pub fn coverage_levy(a4: f64, link: &DerivedConstants) -> f64 {
    if !link.has_operating_window() || a4 == 0.0 {
        return 0.0;
    }
    let a_dagger = link.tau_b / link.c0 + a4 / 4.0;
    let hi = (a_dagger / link.p_low).sqrt();
    let lo = (a_dagger / link.p_up).sqrt();
    // erf(hi) - erf(lo) written with erfc to keep precision near 1.
    0.5 * (a4 / a_dagger).sqrt() * (erfc(lo) - erfc(hi))
}

/// Coverage as `int_{P_low}^{P_up} exp(-tau_B / (c0 rho)) f(rho) d rho` with
/// the density obtained by contour inversion.
pub fn coverage_by_quadrature(
    power: &IncidentPower,
    link: &DerivedConstants,
    talbot: &Talbot,
) -> Result<f64> {
    if !link.has_operating_window() {
        return Ok(0.0);
    }
    let snr_scale = link.tau_b / link.c0;
    let integrand = |x: f64| -> Result<f64> {
        let rho = x.exp();
        Ok((-snr_scale / rho).exp() * power.pdf(rho, talbot)? * rho)
    };
    let r = quad::integrate(integrand, link.p_low.ln(), link.p_up.ln(), 1e-10, 1e-9, 400)?;
    if !r.converged {
        return Err(numerical(format!(
            "coverage quadrature did not converge (estimate {:.6e} +/- {:.1e})",
            r.value, r.error
        )));
    }
    check_unit_interval(r.value, link.p_low)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{a_mu, LinkBudget};

    fn voip(mu: f64) -> (IncidentPower, DerivedConstants) {
        let link = LinkBudget::default().derive(mu).unwrap();
        let a = a_mu(mu, 0.005, link.p_k(0.43)).unwrap();
        (IncidentPower::Poisson { mu, a_mu: a }, link)
    }

    #[test]
    fn outage_vanishes_with_activation_threshold() {
        let mut b = LinkBudget::default();
        b.rho_b = 1e-30;
        let link = b.derive(4.0).unwrap();
        let a = a_mu(4.0, 0.005, link.p_k(0.43)).unwrap();
        let p = IncidentPower::Poisson { mu: 4.0, a_mu: a };
        assert!(energy_outage(&p, &link, &Talbot::default()).unwrap() < 1e-12);
    }

    #[test]
    fn coverage_vanishes_for_impossible_snr() {
        let mut b = LinkBudget::default();
        b.tau_b = 1e15;
        let link = b.derive(4.0).unwrap();
        let a = a_mu(4.0, 0.005, link.p_k(0.43)).unwrap();
        let p = IncidentPower::Poisson { mu: 4.0, a_mu: a };
        assert!(coverage(&p, &link, &Talbot::default()).unwrap() < 1e-12);
    }

    #[test]
    fn coverage_is_zero_without_operating_window() {
        let mut b = LinkBudget::default();
        b.p_max = 1e-9;
        let (p, _) = voip(4.0);
        let link = b.derive(4.0).unwrap();
        assert!(!link.has_operating_window());
        assert_eq!(coverage(&p, &link, &Talbot::default()).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_coverage_matches_closed_form() {
        let (p, link) = voip(4.0);
        let tal = Talbot::default();
        let a4 = match p {
            IncidentPower::Poisson { a_mu, .. } => a_mu,
            _ => unreachable!(),
        };
        let closed = coverage_levy(a4, &link);
        let quad = coverage_by_quadrature(&p, &link, &tal).unwrap();
        assert!((closed - quad).abs() < 1e-6, "{closed} vs {quad}");

        // Also with an SNR constraint that actually binds.
        let mut b = LinkBudget::default();
        b.noise = 1e-7;
        let link = b.derive(4.0).unwrap();
        let closed = coverage_levy(a4, &link);
        let quad = coverage_by_quadrature(&p, &link, &tal).unwrap();
        assert!(closed < 0.2);
        assert!((closed - quad).abs() < 1e-6, "{closed} vs {quad}");
    }

    #[test]
    fn coverage_bounded_by_window_probability() {
        let tal = Talbot::default();
        for mu in [3.0, 3.5, 4.0, 4.5] {
            let (p, link) = voip(mu);
            let c = coverage(&p, &link, &tal).unwrap();
            let window = p.cdf(link.p_up, &tal).unwrap() - p.cdf(link.p_low, &tal).unwrap();
            assert!(c <= window + 1e-9, "mu={mu}: {c} > {window}");
        }
    }

    #[test]
    fn inversion_grid_rejects_non_positive() {
        let (p, _) = voip(4.0);
        assert!(invert_to_pdf_cdf(&p, &[1e-3, 0.0], &Talbot::default()).is_err());
    }

    #[test]
    fn cdf_reaches_one() {
        let (p, _) = voip(4.0);
        let tal = Talbot::default();
        let c = p.cdf(1e9, &tal).unwrap();
        assert!((1.0 - c).abs() < 1e-6);
    }
}
