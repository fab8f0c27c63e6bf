//! Closed forms for the thinned Poisson network.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::error::{domain, Result};

/// Normalized sinc, sin(pi x) / (pi x).
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 2.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(domain(format!(
            "path-loss exponent must exceed 2, got {mu}"
        )))
    }
}

/// Pattern figure of merit `[pi zeta_k / sinc(2/mu)]^(mu/2) p_k`.
pub fn a_mu(mu: f64, zeta_k: f64, p_k: f64) -> Result<f64> {
    check_mu(mu)?;
    if zeta_k < 0.0 || p_k < 0.0 {
        return Err(domain("density and power scale must be non-negative"));
    }
    Ok((PI * zeta_k / sinc(2.0 / mu)).powf(mu / 2.0) * p_k)
}

/// Laplace transform `exp(-(a_mu s)^(2/mu))` of the aggregate incident power
/// from a Poisson network in the plane.
pub fn laplace_pi_ppp(s: Complex64, mu: f64, a_mu: f64) -> Result<Complex64> {
    check_mu(mu)?;
    if s == Complex64::new(0.0, 0.0) || a_mu == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok((-(s * a_mu).powf(2.0 / mu)).exp())
}

/// Levy density and distribution function for mu = 4.
pub fn levy_pdf_cdf(a4: f64, rho: f64) -> (f64, f64) {
    if rho <= 0.0 {
        return (0.0, 0.0);
    }
    let pdf = 0.5 * (a4 / PI).sqrt() * rho.powf(-1.5) * (-a4 / (4.0 * rho)).exp();
    let cdf = erfc((a4 / (4.0 * rho)).sqrt());
    (pdf, cdf)
}
