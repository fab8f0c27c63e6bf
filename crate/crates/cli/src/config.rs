//! Experiment configuration: the JSON file format (explicit units in field
//! names) and its normalized SI form.

use std::path::PathBuf;

use ambiscatter::analytics::{db_to_linear, dbm_to_watts, wavelength_from_ghz, LinkBudget};
use ambiscatter::geometry::components_for;
use ambiscatter::traffic::PatternSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Link budget as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub p_pu_w: f64,
    pub g_pu_dbi: f64,
    pub g_st_dbi: f64,
    pub g_sr_dbi: f64,
    pub carrier_ghz: f64,
    pub eta: f64,
    pub d0_m: f64,
    pub d_tr_m: f64,
    pub noise_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    pub rho_b_dbm: f64,
    pub tau_b_db: f64,
    pub p_max_w: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            p_pu_w: 0.2,
            g_pu_dbi: 6.0,
            g_st_dbi: 1.8,
            g_sr_dbi: 1.8,
            carrier_ghz: 1.8,
            eta: 0.6,
            d0_m: 1.0,
            d_tr_m: 3.0,
            noise_dbm_per_hz: -130.0,
            bandwidth_hz: 1.0,
            rho_b_dbm: -36.0,
            tau_b_db: 3.0,
            p_max_w: 0.2,
        }
    }
}

impl LinkConfig {
    pub fn to_budget(&self) -> LinkBudget {
        LinkBudget {
            p_pu: self.p_pu_w,
            g_pu: db_to_linear(self.g_pu_dbi),
            g_st: db_to_linear(self.g_st_dbi),
            g_sr: db_to_linear(self.g_sr_dbi),
            wavelength: wavelength_from_ghz(self.carrier_ghz),
            eta: self.eta,
            d0: self.d0_m,
            d_tr: self.d_tr_m,
            noise: dbm_to_watts(self.noise_dbm_per_hz) * self.bandwidth_hz,
            rho_b: dbm_to_watts(self.rho_b_dbm),
            tau_b: db_to_linear(self.tau_b_db),
            p_max: self.p_max_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub density_per_m2: f64,
    pub alpha: f64,
    pub path_loss_exponent: f64,
    pub window_radius_m: f64,
    pub origin_guard_m: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            density_per_m2: 0.03,
            alpha: 0.0,
            path_loss_exponent: 4.0,
            window_radius_m: 100.0,
            origin_guard_m: 1e-3,
        }
    }
}

/// One synthetic traffic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub name: String,
    pub mean_length_bytes: f64,
    pub mean_interarrival_s: f64,
    pub length_variance_bytes2: f64,
    pub portion: f64,
}

impl PatternConfig {
    fn from_spec(name: &str, s: PatternSpec) -> Self {
        Self {
            name: name.into(),
            mean_length_bytes: s.mean_length,
            mean_interarrival_s: s.mean_interarrival,
            length_variance_bytes2: s.length_variance,
            portion: s.portion,
        }
    }

    pub fn to_spec(&self) -> PatternSpec {
        PatternSpec {
            mean_length: self.mean_length_bytes,
            mean_interarrival: self.mean_interarrival_s,
            length_variance: self.length_variance_bytes2,
            portion: self.portion,
        }
    }
}

/// VoIP, Game and UDP with their measured statistics.
pub fn reference_patterns() -> Vec<PatternConfig> {
    ["voip", "game", "udp"]
        .iter()
        .zip(PatternSpec::reference_set())
        .map(|(n, s)| PatternConfig::from_spec(n, s))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Packet trace to classify. When absent, traces are synthesized from
    /// `patterns`.
    pub trace_path: Option<PathBuf>,
    pub patterns: Vec<PatternConfig>,
    pub pus: usize,
    pub observations: usize,
    pub link_rate_bps: f64,
    /// Slot length for busy-probability estimation; the observed span when
    /// absent.
    pub slot_s: Option<f64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            trace_path: None,
            patterns: reference_patterns(),
            pus: 30,
            observations: 50,
            link_rate_bps: 54e6,
            slot_s: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Path-loss exponent.
    Mu,
    /// Repulsion.
    Alpha,
    /// Density of one pattern (per m^2) with the network density held fixed.
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Pattern whose density is swept; only used by the density axis.
    #[serde(default)]
    pub pattern: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Mu,
            values: vec![4.0],
            pattern: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Gibbs,
    MeanShift,
    /// True labels of a synthetic trace.
    Oracle,
}

impl Classifier {
    pub fn name(self) -> &'static str {
        match self {
            Classifier::Gibbs => "gibbs",
            Classifier::MeanShift => "mean_shift",
            Classifier::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    /// Z-score each feature across all observations before clustering.
    pub standardize: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            sweeps: 500,
            burn_in: 100,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanShiftConfig {
    /// Neighbour quantile for the bandwidth estimate.
    pub quantile: f64,
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        Self { quantile: 0.3 }
    }
}

/// A config file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub link: LinkConfig,
    pub network: NetworkConfig,
    pub traffic: TrafficConfig,
    pub sweep: SweepConfig,
    pub classifiers: Vec<Classifier>,
    pub gibbs: GibbsConfig,
    pub mean_shift: MeanShiftConfig,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            link: LinkConfig::default(),
            network: NetworkConfig::default(),
            traffic: TrafficConfig::default(),
            sweep: SweepConfig::default(),
            classifiers: vec![Classifier::Gibbs],
            gibbs: GibbsConfig::default(),
            mean_shift: MeanShiftConfig::default(),
            trials: 10_000,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// A validated configuration with every quantity in SI units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalized {
    pub budget: LinkBudget,
    pub network: NetworkConfig,
    pub traffic: TrafficConfig,
    pub sweep: SweepConfig,
    pub classifiers: Vec<Classifier>,
    pub gibbs: GibbsConfig,
    pub mean_shift: MeanShiftConfig,
    pub trials: usize,
    pub seed: u64,
}

impl Normalized {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Short digest of the normalized config, carried on every output row.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        hex::encode(&digest[..8])
    }

    pub fn is_synthetic(&self) -> bool {
        self.traffic.trace_path.is_none()
    }
}

/// A violated invariant and the field it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn check_alpha(alpha: f64) -> Result<(), String> {
    if alpha == 0.0 {
        return Ok(());
    }
    components_for(alpha).map(|_| ()).map_err(|e| e.to_string())
}

/// Applies unit conversions and checks every invariant, reporting all
/// violations at once.
pub fn validate_config(config: &ExperimentConfig) -> Result<Normalized, Vec<FieldError>> {
    let mut errors = Vec::new();
    let mut fail = |field: &str, message: String| {
        errors.push(FieldError {
            field: field.into(),
            message,
        })
    };

    let budget = config.link.to_budget();
    if let Err(e) = budget.validate() {
        fail("link", e.to_string());
    }

    let net = &config.network;
    if !(net.density_per_m2 > 0.0 && net.density_per_m2.is_finite()) {
        fail(
            "network.density_per_m2",
            format!("must be positive, got {}", net.density_per_m2),
        );
    }
    if let Err(m) = check_alpha(net.alpha) {
        fail("network.alpha", m);
    }
    if !(net.path_loss_exponent > 2.0) {
        fail(
            "network.path_loss_exponent",
            format!(
                "must exceed 2 for a finite aggregate power, got {}",
                net.path_loss_exponent
            ),
        );
    }
    if !(net.window_radius_m > 0.0 && net.window_radius_m.is_finite()) {
        fail(
            "network.window_radius_m",
            format!("must be positive, got {}", net.window_radius_m),
        );
    }
    if !(net.origin_guard_m > 0.0 && net.origin_guard_m < net.window_radius_m) {
        fail(
            "network.origin_guard_m",
            format!("must lie in (0, window radius), got {}", net.origin_guard_m),
        );
    }

    let t = &config.traffic;
    if t.trace_path.is_none() {
        if t.patterns.is_empty() {
            fail(
                "traffic.patterns",
                "synthetic traces need at least one pattern".into(),
            );
        }
        for (i, p) in t.patterns.iter().enumerate() {
            let field = |name: &str| format!("traffic.patterns[{i}].{name}");
            if !(p.mean_length_bytes > 0.0) {
                fail(
                    &field("mean_length_bytes"),
                    format!("must be positive, got {}", p.mean_length_bytes),
                );
            }
            if !(p.mean_interarrival_s > 0.0) {
                fail(
                    &field("mean_interarrival_s"),
                    format!("must be positive, got {}", p.mean_interarrival_s),
                );
            }
            if !(p.length_variance_bytes2 >= 0.0) {
                fail(
                    &field("length_variance_bytes2"),
                    format!("must be non-negative, got {}", p.length_variance_bytes2),
                );
            }
            if !(p.portion > 0.0 && p.portion <= 1.0) {
                fail(
                    &field("portion"),
                    format!("must lie in (0, 1], got {}", p.portion),
                );
            }
        }
        let total: f64 = t.patterns.iter().map(|p| p.portion).sum();
        if !t.patterns.is_empty() && (total - 1.0).abs() > 1e-9 {
            fail(
                "traffic.patterns",
                format!("portions must sum to 1, got {total}"),
            );
        }
        if t.pus == 0 {
            fail("traffic.pus", "must be positive".into());
        }
    }
    if t.observations < 2 {
        fail(
            "traffic.observations",
            format!("need at least 2, got {}", t.observations),
        );
    }
    if !(t.link_rate_bps > 0.0) {
        fail(
            "traffic.link_rate_bps",
            format!("must be positive, got {}", t.link_rate_bps),
        );
    }
    if let Some(slot) = t.slot_s {
        if !(slot > 0.0) {
            fail("traffic.slot_s", format!("must be positive, got {slot}"));
        }
    }

    let s = &config.sweep;
    if s.values.is_empty() {
        fail("sweep.values", "need at least one value".into());
    }
    for (i, v) in s.values.iter().enumerate() {
        let field = format!("sweep.values[{i}]");
        match s.axis {
            SweepAxis::Mu if !(*v > 2.0) => fail(
                &field,
                format!("path-loss exponent must exceed 2 for a finite aggregate power, got {v}"),
            ),
            SweepAxis::Alpha => {
                if let Err(m) = check_alpha(*v) {
                    fail(&field, m);
                }
            }
            SweepAxis::Density if !(*v > 0.0 && *v < net.density_per_m2) => fail(
                &field,
                format!(
                    "pattern density must lie in (0, {}), got {v}",
                    net.density_per_m2
                ),
            ),
            _ => {}
        }
    }
    if s.axis == SweepAxis::Density {
        if t.trace_path.is_some() {
            fail(
                "sweep.axis",
                "a density sweep needs synthetic traces".into(),
            );
        }
        if t.patterns.len() < 2 {
            fail(
                "sweep.axis",
                "a density sweep needs at least two patterns".into(),
            );
        }
        if s.pattern >= t.patterns.len().max(1) {
            fail(
                "sweep.pattern",
                format!("no pattern {} among {}", s.pattern, t.patterns.len()),
            );
        }
    }

    if config.classifiers.is_empty() {
        fail("classifiers", "need at least one classifier".into());
    }
    if config.classifiers.contains(&Classifier::Oracle) && t.trace_path.is_some() {
        fail(
            "classifiers",
            "the oracle classifier needs synthetic traces".into(),
        );
    }
    if config.gibbs.sweeps <= config.gibbs.burn_in {
        fail(
            "gibbs.sweeps",
            format!(
                "must exceed burn_in ({}), got {}",
                config.gibbs.burn_in, config.gibbs.sweeps
            ),
        );
    }
    if !(config.mean_shift.quantile > 0.0 && config.mean_shift.quantile <= 1.0) {
        fail(
            "mean_shift.quantile",
            format!("must lie in (0, 1], got {}", config.mean_shift.quantile),
        );
    }
    if config.trials == 0 {
        fail("trials", "must be positive".into());
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    let mut classifiers = config.classifiers.clone();
    classifiers.sort();
    classifiers.dedup();
    Ok(Normalized {
        budget,
        network: config.network.clone(),
        traffic: config.traffic.clone(),
        sweep: config.sweep.clone(),
        classifiers,
        gibbs: config.gibbs.clone(),
        mean_shift: config.mean_shift.clone(),
        trials: config.trials,
        seed: config.seed,
    })
}
