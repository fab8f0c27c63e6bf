//! Analytic performance of a tag harvesting from one traffic pattern.

mod fredholm;
mod link_budget;
mod metrics;
mod ppp;
mod selection;
mod talbot;

use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::Serialize;

pub use fredholm::{FredholmGrid, PatternKernel, MODE_MASS_CUTOFF};
pub use link_budget::{
    db_to_linear, dbm_to_watts, wavelength_from_ghz, DerivedConstants, LinkBudget, SPEED_OF_LIGHT,
};
pub use metrics::{
    coverage, coverage_by_quadrature, coverage_levy, energy_outage, invert_to_pdf_cdf,
    IncidentPower, InvertedDistribution, CDF_TOLERANCE,
};
pub use ppp::{a_mu, laplace_pi_ppp, levy_pdf_cdf, sinc};
pub use selection::{argmax, select_traffic_claim, select_traffic_exhaustive, Selection};
pub use talbot::{Talbot, DEFAULT_NODES};

use crate::error::{domain, Result};
use crate::traffic::PatternSpec;

/// Default observation window radius in metres.
pub const DEFAULT_WINDOW_RADIUS: f64 = 100.0;

/// Density and activity of one traffic pattern as seen by the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatternLoad {
    /// Density of transmitters carrying this pattern (points/m^2).
    pub zeta_k: f64,
    /// Busy probability.
    pub p_b: f64,
}

/// Loads of a set of traffic patterns sharing a network of density `zeta`,
/// with busy probabilities taken from their duty cycles at `link_rate`.
pub fn loads_from_specs(specs: &[PatternSpec], zeta: f64, link_rate: f64) -> Vec<PatternLoad> {
    specs
        .iter()
        .map(|s| PatternLoad {
            zeta_k: s.portion * zeta,
            p_b: s.duty_cycle(link_rate),
        })
        .collect()
}

/// Analytic metrics of one pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternAnalytics {
    pub pattern: usize,
    pub zeta_k: f64,
    pub p_b: f64,
    pub a_mu: f64,
    pub outage: f64,
    pub coverage: f64,
}

/// Metrics of every pattern in a scenario together with both selections.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioAnalytics {
    pub alpha: f64,
    pub mu: f64,
    pub patterns: Vec<PatternAnalytics>,
    pub by_claim: Selection,
    pub by_exhaustive: Selection,
}

/// Eigenvalues of the traffic kernel for one pattern on a fresh grid.
pub fn kernel_eigenvalues(
    s: Complex64,
    budget: &LinkBudget,
    mu: f64,
    zeta: f64,
    load: PatternLoad,
    window_radius: f64,
) -> Result<Vec<Complex64>> {
    let link = budget.derive(mu)?;
    let grid = FredholmGrid::new(zeta, window_radius)?;
    grid.eigenvalues(s, &kernel_for(&link, zeta, load)?)
}

fn kernel_for(link: &DerivedConstants, zeta: f64, load: PatternLoad) -> Result<PatternKernel> {
    if !(zeta > 0.0) || load.zeta_k < 0.0 || load.zeta_k > zeta * (1.0 + 1e-12) {
        return Err(domain(format!(
            "pattern density {} must lie in [0, {zeta}]",
            load.zeta_k
        )));
    }
    Ok(PatternKernel {
        portion: (load.zeta_k / zeta).min(1.0),
        p_k: link.p_k(load.p_b),
        mu: link.mu,
    })
}

/// Evaluates outage, coverage and selections for a link budget.
///
/// Fredholm grids are cached per total density, so sweeps over the
/// path-loss exponent or the repulsion reuse them.
#[derive(Debug)]
pub struct AnalyticEngine {
    budget: LinkBudget,
    talbot: Talbot,
    window_radius: f64,
    grids: Mutex<Vec<Arc<FredholmGrid>>>,
}

impl AnalyticEngine {
    pub fn new(budget: LinkBudget) -> Result<Self> {
        Self::with_options(budget, DEFAULT_WINDOW_RADIUS, Talbot::default())
    }

    pub fn with_options(budget: LinkBudget, window_radius: f64, talbot: Talbot) -> Result<Self> {
        budget.validate()?;
        if !(window_radius > 0.0 && window_radius.is_finite()) {
            return Err(domain(format!(
                "window radius must be positive, got {window_radius}"
            )));
        }
        Ok(Self {
            budget,
            talbot,
            window_radius,
            grids: Mutex::new(Vec::new()),
        })
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn talbot(&self) -> &Talbot {
        &self.talbot
    }

    pub fn window_radius(&self) -> f64 {
        self.window_radius
    }

    pub fn grid(&self, zeta: f64) -> Result<Arc<FredholmGrid>> {
        let mut grids = self.grids.lock().expect("grid cache poisoned");
        if let Some(g) = grids.iter().find(|g| g.zeta() == zeta) {
            return Ok(Arc::clone(g));
        }
        let g = Arc::new(FredholmGrid::new(zeta, self.window_radius)?);
        grids.push(Arc::clone(&g));
        Ok(g)
    }

    /// Law of the incident power from one pattern. `alpha = 0` selects the
    /// Poisson closed form; otherwise `alpha` must lie in [-1, 0).
    pub fn incident_power(
        &self,
        alpha: f64,
        mu: f64,
        zeta: f64,
        load: PatternLoad,
    ) -> Result<IncidentPower> {
        let link = self.budget.derive(mu)?;
        if alpha == 0.0 {
            return Ok(IncidentPower::Poisson {
                mu,
                a_mu: a_mu(mu, load.zeta_k, link.p_k(load.p_b))?,
            });
        }
        if !(-1.0..0.0).contains(&alpha) {
            return Err(domain(format!(
                "repulsion must lie in [-1, 0], got {alpha}"
            )));
        }
        Ok(IncidentPower::Ginibre {
            grid: self.grid(zeta)?,
            alpha,
            kernel: kernel_for(&link, zeta, load)?,
        })
    }

    pub fn pattern(
        &self,
        index: usize,
        alpha: f64,
        mu: f64,
        zeta: f64,
        load: PatternLoad,
    ) -> Result<PatternAnalytics> {
        let link = self.budget.derive(mu)?;
        let power = self.incident_power(alpha, mu, zeta, load)?;
        Ok(PatternAnalytics {
            pattern: index,
            zeta_k: load.zeta_k,
            p_b: load.p_b,
            a_mu: a_mu(mu, load.zeta_k, link.p_k(load.p_b))?,
            outage: energy_outage(&power, &link, &self.talbot)?,
            coverage: coverage(&power, &link, &self.talbot)?,
        })
    }

    /// All patterns of a network whose total density is the sum of the
    /// pattern densities.
    pub fn scenario(
        &self,
        alpha: f64,
        mu: f64,
        loads: &[PatternLoad],
    ) -> Result<ScenarioAnalytics> {
        if loads.is_empty() {
            return Err(domain("scenario needs at least one pattern"));
        }
        let zeta: f64 = loads.iter().map(|l| l.zeta_k).sum();
        let patterns = loads
            .iter()
            .enumerate()
            .map(|(i, l)| self.pattern(i, alpha, mu, zeta, *l))
            .collect::<Result<Vec<_>>>()?;
        let a: Vec<f64> = patterns.iter().map(|p| p.a_mu).collect();
        let c: Vec<f64> = patterns.iter().map(|p| p.coverage).collect();
        Ok(ScenarioAnalytics {
            alpha,
            mu,
            by_claim: select_traffic_claim(&a).expect("non-empty"),
            by_exhaustive: select_traffic_exhaustive(&c).expect("non-empty"),
            patterns,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::erf::erfc;

    fn voip() -> PatternLoad {
        PatternLoad {
            zeta_k: 0.005,
            p_b: 0.43,
        }
    }

    #[test]
    fn laplace_is_one_at_origin() {
        let engine = AnalyticEngine::new(LinkBudget::default()).unwrap();
        for alpha in [0.0, -0.25, -0.5, -1.0] {
            let p = engine.incident_power(alpha, 4.0, 0.03, voip()).unwrap();
            assert_eq!(
                p.laplace(Complex64::new(0.0, 0.0)).unwrap(),
                Complex64::new(1.0, 0.0)
            );
        }
    }

    #[test]
    fn inverted_cdf_matches_levy() {
        let engine = AnalyticEngine::new(LinkBudget::default()).unwrap();
        let p = engine.incident_power(0.0, 4.0, 0.03, voip()).unwrap();
        let a4 = match p {
            IncidentPower::Poisson { a_mu, .. } => a_mu,
            _ => unreachable!(),
        };
        let grid: Vec<f64> = (0..40)
            .map(|i| 1e-8 * 10f64.powf(8.0 * i as f64 / 39.0))
            .collect();
        let inv = invert_to_pdf_cdf(&p, &grid, engine.talbot()).unwrap();
        for (rho, c) in grid.iter().zip(&inv.cdf) {
            let exact = erfc((a4 / (4.0 * rho)).sqrt());
            assert!((c - exact).abs() < 1e-6, "rho={rho}: {c} vs {exact}");
        }
    }

    #[test]
    fn scenario_rejects_empty() {
        let engine = AnalyticEngine::new(LinkBudget::default()).unwrap();
        assert!(engine.scenario(0.0, 4.0, &[]).is_err());
    }

    #[test]
    fn identical_patterns_tie_to_first() {
        let engine = AnalyticEngine::new(LinkBudget::default()).unwrap();
        let s = engine.scenario(0.0, 4.0, &[voip(), voip()]).unwrap();
        assert_eq!(s.by_exhaustive.index, 0);
        assert!(s.by_exhaustive.is_tie());
        assert_eq!(s.by_claim.index, 0);
    }

    #[test]
    fn monotone_in_figure_of_merit() {
        let link = LinkBudget::default().derive(4.0).unwrap();
        let mut last = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..20 {
            let a4 = 1e-7 * 10f64.powf(3.0 * i as f64 / 19.0);
            let outage = levy_pdf_cdf(a4, link.p_low).1;
            let cov = coverage_levy(a4, &link);
            assert!(outage < last.0 && cov > last.1, "a4={a4}");
            last = (outage, cov);
        }
    }

    proptest! {
        #[test]
        fn laplace_bounded_on_right_half_plane(
            re in 0.0f64..1e6, im in -1e6f64..1e6, alpha_idx in 0usize..3,
        ) {
            let alpha = [0.0, -0.5, -1.0][alpha_idx];
            let engine = AnalyticEngine::with_options(LinkBudget::default(), 30.0, Talbot::default()).unwrap();
            let p = engine.incident_power(alpha, 4.0, 0.03, voip()).unwrap();
            let l = p.laplace(Complex64::new(re, im)).unwrap();
            prop_assert!(l.norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn claim_invariant_under_power_rescaling(
            p_b in prop::collection::vec(1e-4f64..1.0, 3),
            scale in 1e-3f64..1e3,
        ) {
            let zetas = [0.005, 0.01, 0.015];
            let merit = |c: f64| -> Vec<f64> {
                zetas.iter().zip(&p_b).map(|(z, p)| a_mu(3.5, *z, c * p).unwrap()).collect()
            };
            let a = select_traffic_claim(&merit(1.0)).unwrap();
            let b = select_traffic_claim(&merit(scale)).unwrap();
            prop_assert_eq!(a.index, b.index);
        }
    }
}
