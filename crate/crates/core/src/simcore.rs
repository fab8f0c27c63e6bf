//! Monte Carlo estimates of energy outage and coverage.
//!
//! Each trial draws a fresh network, labels its points with traffic
//! patterns, and for every pattern realizes the incident power at the tag
//! (origin) and the tag-to-receiver link.

use std::f64::consts::PI;
use std::io::Write;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::analytics::{DerivedConstants, LinkBudget, DEFAULT_WINDOW_RADIUS};
use crate::error::{domain, Result};
use crate::geometry::{components_for, sample_network, validate_portions, PointPattern};

/// Default distance below which a transmitter is moved out to the guard
/// radius (metres).
pub const DEFAULT_ORIGIN_GUARD: f64 = 1e-3;

/// How the busy probability enters a realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BusyModel {
    /// Every transmitter contributes `p_b` times its received power.
    #[default]
    DutyCycle,
    /// Every transmitter is independently on with probability `p_b`.
    Bernoulli,
}

/// One realization of the tag's link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialResult {
    /// Incident power (W).
    pub p_i: f64,
    /// Harvested power (W).
    pub p_e: f64,
    /// Backscattered power (W).
    pub p_t: f64,
    pub snr: f64,
    pub energy_ok: bool,
    pub interference_ok: bool,
    pub snr_ok: bool,
}

impl TrialResult {
    pub fn covered(&self) -> bool {
        self.energy_ok && self.interference_ok && self.snr_ok
    }
}

/// Incident power of one realization together with the number of
/// transmitters moved out to the guard radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentDraw {
    pub power: f64,
    pub guarded: usize,
}

/// Sum of Rayleigh-faded received powers from the points labelled `k`.
/// An unlabelled pattern counts every point.
pub fn realize_incident_power<R: Rng + ?Sized>(
    pattern: &PointPattern,
    k: usize,
    p_b: f64,
    link: &DerivedConstants,
    origin_guard: f64,
    busy: BusyModel,
    rng: &mut R,
) -> IncidentDraw {
    let mut power = 0.0;
    let mut guarded = 0;
    let mut add = |x: num_complex::Complex64, rng: &mut R| {
        let mut d = x.norm();
        if d < origin_guard {
            d = origin_guard;
            guarded += 1;
        }
        let scale = match busy {
            BusyModel::DutyCycle => p_b,
            BusyModel::Bernoulli => {
                if rng.random::<f64>() < p_b {
                    1.0
                } else {
                    return;
                }
            }
        };
        let h: f64 = rng.sample(Exp1);
        power += scale * link.path_gain * d.powf(-link.mu) * h;
    };
    match &pattern.labels {
        Some(_) => pattern.with_label(k).for_each(|x| add(x, rng)),
        None => pattern.points.iter().for_each(|x| add(*x, rng)),
    }
    IncidentDraw { power, guarded }
}

/// Link quantities for a given incident power and tag-to-receiver fading.
pub fn link_outcome(
    p_i: f64,
    h_tr: f64,
    budget: &LinkBudget,
    link: &DerivedConstants,
) -> TrialResult {
    let p_e = 0.5 * budget.eta * p_i * budget.wavelength.powi(2) * budget.g_st / (4.0 * PI);
    let p_t = p_i * link.delta_sigma;
    let snr = p_t * h_tr * link.ae_sr * (budget.d0 / budget.d_tr).powf(link.mu) / budget.noise;
    TrialResult {
        p_i,
        p_e,
        p_t,
        snr,
        // Compared in incident-power units so the boundaries are exact.
        energy_ok: p_i >= link.p_low,
        interference_ok: p_i <= link.p_up,
        snr_ok: h_tr >= link.tau_b / (link.c0 * p_i),
    }
}

/// Draws the tag-to-receiver fading and evaluates the link.
pub fn realize_link<R: Rng + ?Sized>(
    p_i: f64,
    budget: &LinkBudget,
    link: &DerivedConstants,
    rng: &mut R,
) -> TrialResult {
    let h_tr: f64 = rng.sample(Exp1);
    link_outcome(p_i, h_tr, budget, link)
}

/// Network and link settings for a simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub budget: LinkBudget,
    pub mu: f64,
    /// Repulsion, 0 or -1/m.
    pub alpha: f64,
    /// Density of each traffic pattern; the network density is their sum.
    pub densities: Vec<f64>,
    /// Busy probability of each pattern.
    pub busy_probabilities: Vec<f64>,
    pub window_radius: f64,
    pub origin_guard: f64,
    pub busy_model: BusyModel,
}

impl SimConfig {
    pub fn new(
        budget: LinkBudget,
        mu: f64,
        alpha: f64,
        densities: Vec<f64>,
        busy_probabilities: Vec<f64>,
    ) -> Self {
        Self {
            budget,
            mu,
            alpha,
            densities,
            busy_probabilities,
            window_radius: DEFAULT_WINDOW_RADIUS,
            origin_guard: DEFAULT_ORIGIN_GUARD,
            busy_model: BusyModel::default(),
        }
    }

    fn check(&self) -> Result<(DerivedConstants, f64, Vec<f64>)> {
        let link = self.budget.derive(self.mu)?;
        if self.densities.is_empty() || self.densities.len() != self.busy_probabilities.len() {
            return Err(domain("need one busy probability per pattern density"));
        }
        if self.densities.iter().any(|z| !(*z >= 0.0)) {
            return Err(domain("pattern densities must be non-negative"));
        }
        if self
            .busy_probabilities
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(domain("busy probabilities must lie in [0, 1]"));
        }
        if !(self.origin_guard > 0.0) {
            return Err(domain("origin guard must be positive"));
        }
        if self.alpha != 0.0 {
            components_for(self.alpha)?;
        }
        let zeta: f64 = self.densities.iter().sum();
        let portions: Vec<f64> = self.densities.iter().map(|z| z / zeta).collect();
        if zeta > 0.0 {
            validate_portions(&portions)?;
        }
        Ok((link, zeta, portions))
    }
}

/// Empirical metrics of one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McMetrics {
    pub trials: usize,
    pub outage: f64,
    pub outage_se: f64,
    pub coverage: f64,
    pub coverage_se: f64,
    /// Transmitters moved out to the guard radius over all trials.
    pub guarded: usize,
}

fn binomial(successes: usize, trials: usize) -> (f64, f64) {
    let p = successes as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Random stream of one trial; independent of how trials are scheduled.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` realizations and calls `visit(trial, pattern, result)` for
/// every pattern of every trial.
pub fn simulate(
    config: &SimConfig,
    trials: usize,
    seed: u64,
    mut visit: impl FnMut(usize, usize, &TrialResult, usize),
) -> Result<()> {
    let (link, zeta, portions) = config.check()?;
    let chooser = (zeta > 0.0)
        .then(|| WeightedIndex::new(&portions))
        .transpose()
        .map_err(|e| domain(e.to_string()))?;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let mut pattern = if zeta > 0.0 {
            sample_network(zeta, config.alpha, config.window_radius, &mut rng)?
        } else {
            PointPattern {
                points: Vec::new(),
                zeta,
                alpha: config.alpha,
                window_radius: config.window_radius,
                labels: None,
            }
        };
        let labels = match &chooser {
            Some(c) => (0..pattern.len()).map(|_| c.sample(&mut rng)).collect(),
            None => Vec::new(),
        };
        pattern.labels = Some(labels);
        for (k, &p_b) in config.busy_probabilities.iter().enumerate() {
            let draw = realize_incident_power(
                &pattern,
                k,
                p_b,
                &link,
                config.origin_guard,
                config.busy_model,
                &mut rng,
            );
            let result = realize_link(draw.power, &config.budget, &link, &mut rng);
            visit(trial, k, &result, draw.guarded);
        }
    }
    Ok(())
}

/// Empirical outage and coverage of every pattern with binomial standard
/// errors.
pub fn mc_metrics(config: &SimConfig, trials: usize, seed: u64) -> Result<Vec<McMetrics>> {
    if trials == 0 {
        return Err(domain("need at least one trial"));
    }
    let n = config.busy_probabilities.len();
    let mut outages = vec![0usize; n];
    let mut covered = vec![0usize; n];
    let mut guarded = vec![0usize; n];
    simulate(config, trials, seed, |_, k, r, g| {
        outages[k] += usize::from(!r.energy_ok);
        covered[k] += usize::from(r.covered());
        guarded[k] += g;
    })?;
    Ok((0..n)
        .map(|k| {
            let (outage, outage_se) = binomial(outages[k], trials);
            let (coverage, coverage_se) = binomial(covered[k], trials);
            McMetrics {
                trials,
                outage,
                outage_se,
                coverage,
                coverage_se,
                guarded: guarded[k],
            }
        })
        .collect())
}

/// Incident-power samples of one pattern.
pub fn incident_power_samples(
    config: &SimConfig,
    pattern: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(trials);
    simulate(config, trials, seed, |_, k, r, _| {
        if k == pattern {
            out.push(r.p_i);
        }
    })?;
    Ok(out)
}

/// Writes one CSV row per trial and pattern.
pub fn write_trial_dump(
    config: &SimConfig,
    trials: usize,
    seed: u64,
    writer: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "trial",
        "pattern",
        "p_i",
        "p_e",
        "p_t",
        "snr",
        "energy_ok",
        "interference_ok",
        "snr_ok",
    ])?;
    let mut err = None;
    simulate(config, trials, seed, |t, k, r, _| {
        if err.is_some() {
            return;
        }
        let row = [
            t.to_string(),
            k.to_string(),
            r.p_i.to_string(),
            r.p_e.to_string(),
            r.p_t.to_string(),
            r.snr.to_string(),
            r.energy_ok.to_string(),
            r.interference_ok.to_string(),
            r.snr_ok.to_string(),
        ];
        if let Err(e) = w.write_record(&row) {
            err = Some(e);
        }
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}
