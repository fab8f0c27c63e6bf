//! Laplace transform of the incident power from a thinned alpha-Ginibre
//! network inside a disk window.
//!
//! The traffic kernel is the Ginibre kernel of the full network (intensity
//! zeta) scaled by the pattern portion `l_k = zeta_k / zeta`, sandwiched
//! between the radial multiplier `sqrt(s p_k / (|x|^mu + s p_k))`. The
//! Ginibre eigenfunctions `z^n exp(-pi zeta |z|^2 / 2)` stay orthogonal on a
//! disk under any radial weight, so the operator is diagonal in that basis
//! and its eigenvalues are one-dimensional integrals,
//!
//! ```text
//! kappa_n(s) = l_k * int_0^U m(u) u^n e^{-u} / n! du,   u = pi zeta r^2,
//! ```
//!
//! with `U = pi zeta R_O^2` and `m = s p_k / (r^mu + s p_k)`. The Fredholm
//! determinant is then the product over modes.
//!
//! The integrals are evaluated on a fixed composite Gauss-Legendre grid in
//! `v = ln u`. In that variable the poles of `m` for complex `s` on a Talbot
//! contour sit at a fixed distance from the real axis, so uniform panels
//! resolve them, and the fractional powers at `u -> 0` disappear.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, numerical, Result};
use crate::quad::gauss_legendre;

const GL_POINTS: usize = 16;
/// Lower end of the grid in ln u; the first mode loses e^-40 of its mass.
const LN_U_FLOOR: f64 = -40.0;
const MAX_PANEL: f64 = 0.2;
/// Panel width in ln u is capped at this over sqrt(u) where the mode
/// densities become narrow.
const PANEL_SQRT_SCALE: f64 = 0.8;
/// Weights below this are dropped from a mode's row.
const WEIGHT_FLOOR: f64 = 1e-22;
/// Modes whose window mass falls below this are not represented.
pub const MODE_MASS_CUTOFF: f64 = 1e-15;

#[derive(Debug, Clone)]
struct ModeRow {
    start: usize,
    weights: Vec<f64>,
}

/// Quadrature grid for the Ginibre eigenmodes of one (density, window) pair.
///
/// The grid does not depend on `s`, the pattern, or the path-loss exponent,
/// so one instance serves every transform evaluation of a scenario.
#[derive(Debug, Clone)]
pub struct FredholmGrid {
    zeta: f64,
    window_radius: f64,
    u: Vec<f64>,
    /// ln(u / (pi zeta)) = 2 ln r at each node.
    ln_r2: Vec<f64>,
    modes: Vec<ModeRow>,
}

/// The pattern-dependent part of the traffic kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternKernel {
    /// Retention probability `zeta_k / zeta` of the pattern.
    pub portion: f64,
    /// Received-power scale p_k.
    pub p_k: f64,
    /// Path-loss exponent.
    pub mu: f64,
}

impl FredholmGrid {
    pub fn new(zeta: f64, window_radius: f64) -> Result<Self> {
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(domain(format!("density must be positive, got {zeta}")));
        }
        if !(window_radius > 0.0 && window_radius.is_finite()) {
            return Err(domain(format!(
                "window radius must be positive, got {window_radius}"
            )));
        }
        let total = PI * zeta * window_radius * window_radius;
        let v_hi = total.ln();
        let v_lo = LN_U_FLOOR.min(v_hi - 40.0);

        let (gx, gw) = gauss_legendre(GL_POINTS);
        let mut v_nodes = Vec::new();
        let mut v_weights = Vec::new();
        let mut a = v_lo;
        while a < v_hi {
            let width_at = |v: f64| MAX_PANEL.min(PANEL_SQRT_SCALE * (-0.5 * v).exp());
            let h = width_at(a + width_at(a)).min(v_hi - a);
            let b = if v_hi - (a + h) < 1e-3 * h {
                v_hi
            } else {
                a + h
            };
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in gx.iter().zip(&gw) {
                v_nodes.push(mid + half * x);
                v_weights.push(half * w);
            }
            a = b;
        }

        let u: Vec<f64> = v_nodes.iter().map(|v| v.exp()).collect();
        let ln_pz = (PI * zeta).ln();
        let ln_r2 = v_nodes.iter().map(|v| v - ln_pz).collect();
        let ln_w: Vec<f64> = v_weights.iter().map(|w| w.ln()).collect();

        let hard_cap = (total + 60.0 * total.sqrt() + 200.0) as usize;
        let ln_floor = WEIGHT_FLOOR.ln();
        let mut modes = Vec::new();
        for n in 0..hard_cap {
            let np1 = (n + 1) as f64;
            let lg = ln_gamma(np1);
            let mut start = usize::MAX;
            let mut weights = Vec::new();
            for j in 0..u.len() {
                let lw = ln_w[j] + np1 * v_nodes[j] - u[j] - lg;
                if lw > ln_floor {
                    if start == usize::MAX {
                        start = j;
                    }
                    // Pad interior gaps so the row stays contiguous.
                    weights.resize(j - start, 0.0);
                    weights.push(lw.exp());
                }
            }
            let mass: f64 = weights.iter().sum();
            if (n as f64) > total && mass < MODE_MASS_CUTOFF {
                break;
            }
            modes.push(ModeRow {
                start: if start == usize::MAX { 0 } else { start },
                weights,
            });
        }

        Ok(Self {
            zeta,
            window_radius,
            u,
            ln_r2,
            modes,
        })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn window_radius(&self) -> f64 {
        self.window_radius
    }

    /// Number of eigenmodes kept.
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn node_count(&self) -> usize {
        self.u.len()
    }

    /// Fraction of mode `n` inside the window, i.e. the regularized lower
    /// incomplete gamma function P(n + 1, pi zeta R_O^2).
    pub fn window_mass(&self, n: usize) -> f64 {
        self.modes.get(n).map_or(0.0, |m| m.weights.iter().sum())
    }

    fn multiplier(&self, s: Complex64, kernel: &PatternKernel) -> Vec<Complex64> {
        let sp = s * kernel.p_k;
        let half_mu = 0.5 * kernel.mu;
        self.ln_r2
            .iter()
            .map(|&l| {
                let r_mu = (half_mu * l).exp();
                sp / (sp + r_mu)
            })
            .collect()
    }

    /// Eigenvalues kappa_0..kappa_{n_max} of the traffic kernel at `s`.
    pub fn eigenvalues(&self, s: Complex64, kernel: &PatternKernel) -> Result<Vec<Complex64>> {
        validate_kernel(kernel)?;
        if s == Complex64::new(0.0, 0.0) || kernel.p_k == 0.0 || kernel.portion == 0.0 {
            return Ok(vec![Complex64::new(0.0, 0.0); self.modes.len()]);
        }
        let m = self.multiplier(s, kernel);
        let mut out = Vec::with_capacity(self.modes.len());
        for row in &self.modes {
            let seg = &m[row.start..row.start + row.weights.len()];
            let mut acc = Complex64::new(0.0, 0.0);
            for (w, mj) in row.weights.iter().zip(seg) {
                acc += mj * *w;
            }
            let kappa = acc * kernel.portion;
            if !(kappa.re.is_finite() && kappa.im.is_finite()) {
                return Err(numerical(format!(
                    "kernel eigenvalue quadrature diverged at s = {s}"
                )));
            }
            out.push(kappa);
        }
        Ok(out)
    }

    /// `Det(I + alpha K_k(s))^(-1/alpha)` for `alpha` in [-1, 0).
    pub fn laplace(&self, s: Complex64, alpha: f64, kernel: &PatternKernel) -> Result<Complex64> {
        if !(-1.0..0.0).contains(&alpha) {
            return Err(domain(format!(
                "repulsion must lie in [-1, 0) for the determinantal form, got {alpha}"
            )));
        }
        if s == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let kappas = self.eigenvalues(s, kernel)?;
        let mut log_sum = Complex64::new(0.0, 0.0);
        for k in kappas {
            let z = k * alpha;
            let w = z + 1.0;
            if w.re <= 0.0 && w.im.abs() < 1e-12 {
                return Err(numerical(format!(
                    "determinant factor {w} reached the branch cut at s = {s}"
                )));
            }
            log_sum += ln_1p(z);
        }
        Ok((-log_sum / alpha).exp())
    }
}

fn validate_kernel(kernel: &PatternKernel) -> Result<()> {
    if !(0.0..=1.0).contains(&kernel.portion) {
        return Err(domain(format!(
            "portion must lie in [0, 1], got {}",
            kernel.portion
        )));
    }
    if !(kernel.p_k >= 0.0 && kernel.p_k.is_finite()) {
        return Err(domain(format!(
            "p_k must be non-negative, got {}",
            kernel.p_k
        )));
    }
    if !(kernel.mu > 2.0) {
        return Err(domain(format!(
            "path-loss exponent must exceed 2, got {}",
            kernel.mu
        )));
    }
    Ok(())
}

/// ln(1 + z) without cancellation for small |z|.
fn ln_1p(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        z - z2 / 2.0 + z2 * z / 3.0 - z2 * z2 / 4.0
    } else {
        (z + 1.0).ln()
    }
}
