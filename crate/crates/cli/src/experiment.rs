//! The trace, classification, estimation, analysis and simulation pipeline.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ambiscatter::analytics::{
    AnalyticEngine, PatternLoad, ScenarioAnalytics, Talbot, DEFAULT_NODES,
};
use ambiscatter::bnp::{
    estimate_bandwidth, estimate_network_params, majority_vote, mean_shift, observation_points,
    relabel, run_chain, standardize_points, ChainConfig, ChainResult, NiwHyperparams,
    TrafficPattern,
};
use ambiscatter::simcore::{mc_metrics, McMetrics, SimConfig};
use ambiscatter::traffic::{
    extract_features, parse_trace, synthesize_trace, true_labels, PatternSpec, TraceRecord,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{Classifier, FieldError, Normalized, SweepAxis};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<FieldError>),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: ambiscatter::Error,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RunError {
    /// Process exit status: 1 for configuration problems, 2 for failures
    /// while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn core<T>(context: impl FnOnce() -> String, r: ambiscatter::Result<T>) -> Result<T, RunError> {
    r.map_err(|source| RunError::Core {
        context: context(),
        source,
    })
}

fn io<T>(context: impl FnOnce() -> String, r: std::io::Result<T>) -> Result<T, RunError> {
    r.map_err(|source| RunError::Io {
        context: context(),
        source,
    })
}

/// What a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Analytic metrics only.
    Analyze,
    /// Monte Carlo only.
    Simulate,
    /// Both, with the selection rules.
    Full,
}

impl Stage {
    fn file_name(self) -> &'static str {
        match self {
            Stage::Analyze => "analytics.csv",
            Stage::Simulate => "simulation.csv",
            Stage::Full => "experiment.csv",
        }
    }
}

/// Network parameters at one sweep value.
#[derive(Debug, Clone)]
struct Point {
    value: f64,
    mu: f64,
    alpha: f64,
    specs: Vec<PatternSpec>,
}

fn sweep_points(cfg: &Normalized) -> Vec<Point> {
    let base_specs: Vec<PatternSpec> = cfg.traffic.patterns.iter().map(|p| p.to_spec()).collect();
    cfg.sweep
        .values
        .iter()
        .map(|&value| {
            let mut p = Point {
                value,
                mu: cfg.network.path_loss_exponent,
                alpha: cfg.network.alpha,
                specs: base_specs.clone(),
            };
            match cfg.sweep.axis {
                SweepAxis::Mu => p.mu = value,
                SweepAxis::Alpha => p.alpha = value,
                SweepAxis::Density => {
                    let k = cfg.sweep.pattern;
                    let share = value / cfg.network.density_per_m2;
                    let rest: f64 = base_specs
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != k)
                        .map(|(_, s)| s.portion)
                        .sum();
                    for (i, s) in p.specs.iter_mut().enumerate() {
                        s.portion = if i == k {
                            share
                        } else {
                            s.portion / rest * (1.0 - share)
                        };
                    }
                }
            }
            p
        })
        .collect()
}

/// Packet records for a sweep point.
pub fn load_records(cfg: &Normalized, specs: &[PatternSpec]) -> Result<Vec<TraceRecord>, RunError> {
    match &cfg.traffic.trace_path {
        Some(path) => core(
            || format!("reading trace {}", path.display()),
            parse_trace(path),
        ),
        None => core(
            || "synthesizing traces".into(),
            synthesize_trace(specs, cfg.traffic.pus, cfg.traffic.observations, cfg.seed),
        ),
    }
}

/// Pattern label of every PU (in PU-id order) and, for the Gibbs
/// classifier, the chain that produced it.
pub struct Classification {
    pub classifier: Classifier,
    pub pu_labels: Vec<usize>,
    pub pu_ids: Vec<u32>,
    pub chain: Option<ChainResult>,
}

pub fn classify(
    cfg: &Normalized,
    classifier: Classifier,
    records: &[TraceRecord],
) -> Result<Classification, RunError> {
    let rows = cfg.traffic.observations;
    let matrix = core(
        || "extracting features".into(),
        extract_features(records, rows),
    )?;
    let pus = matrix.pu_ids().len();
    let mut points = observation_points(&matrix);
    let mut chain = None;
    let pu_labels = match classifier {
        Classifier::Oracle => true_labels(records).ok_or_else(|| RunError::Core {
            context: "oracle classifier".into(),
            source: ambiscatter::Error::Validation("trace carries no pattern labels".into()),
        })?,
        Classifier::Gibbs => {
            if cfg.gibbs.standardize {
                points = standardize_points(&points);
            }
            let config = ChainConfig {
                sweeps: cfg.gibbs.sweeps,
                burn_in: cfg.gibbs.burn_in,
                seed: cfg.seed,
                ..Default::default()
            };
            let result = core(
                || "running the Gibbs chain".into(),
                run_chain(&points, &NiwHyperparams::standard(3), config),
            )?;
            let labels = majority_vote(result.map_labels(), pus, rows);
            chain = Some(result);
            labels
        }
        Classifier::MeanShift => {
            let bandwidth = core(
                || "estimating the mean-shift bandwidth".into(),
                estimate_bandwidth(&points, cfg.mean_shift.quantile),
            )?;
            let labels = core(
                || "mean-shift clustering".into(),
                mean_shift(&points, bandwidth),
            )?;
            majority_vote(&labels, pus, rows)
        }
    };
    Ok(Classification {
        classifier,
        // Learned labels are renumbered by first appearance; oracle labels
        // keep the pattern indices of the config.
        pu_labels: if classifier == Classifier::Oracle {
            pu_labels
        } else {
            relabel(&pu_labels)
        },
        pu_ids: matrix.pu_ids().to_vec(),
        chain,
    })
}

pub fn estimate_patterns(
    cfg: &Normalized,
    labels: &Classification,
    records: &[TraceRecord],
) -> Result<Vec<TrafficPattern>, RunError> {
    core(
        || format!("estimating {} pattern parameters", labels.classifier.name()),
        estimate_network_params(
            &labels.pu_labels,
            records,
            cfg.traffic.slot_s,
            cfg.traffic.link_rate_bps,
            cfg.network.density_per_m2,
        ),
    )
}

/// Results for one sweep value and classifier.
struct Evaluated {
    patterns: Vec<TrafficPattern>,
    analytic: Option<ScenarioAnalytics>,
    mc: Option<Vec<McMetrics>>,
}

#[derive(Debug, Serialize)]
struct ExperimentRow<'a> {
    config_hash: &'a str,
    seed: u64,
    axis: SweepAxis,
    value: f64,
    mu: f64,
    alpha: f64,
    classifier: &'static str,
    rule: &'static str,
    pattern: usize,
    selected: bool,
    portion: f64,
    density: f64,
    busy_probability: f64,
    a_mu: f64,
    outage: f64,
    coverage: f64,
    mc_outage: f64,
    mc_outage_se: f64,
    mc_coverage: f64,
    mc_coverage_se: f64,
}

#[derive(Debug, Serialize)]
struct AnalyticRow<'a> {
    config_hash: &'a str,
    seed: u64,
    axis: SweepAxis,
    value: f64,
    classifier: &'static str,
    pattern: usize,
    alpha: f64,
    mu: f64,
    density: f64,
    busy_probability: f64,
    a_mu: f64,
    outage: f64,
    coverage: f64,
    selected_by_claim: bool,
    selected_by_exhaustive: bool,
}

#[derive(Debug, Serialize)]
struct SimulationRow<'a> {
    config_hash: &'a str,
    seed: u64,
    axis: SweepAxis,
    value: f64,
    mu: f64,
    alpha: f64,
    classifier: &'static str,
    pattern: usize,
    density: f64,
    busy_probability: f64,
    trials: usize,
    outage: f64,
    outage_se: f64,
    coverage: f64,
    coverage_se: f64,
    guarded: usize,
}

fn write_rows(
    w: &mut csv::Writer<impl Write>,
    cfg: &Normalized,
    hash: &str,
    point: &Point,
    classifier: Classifier,
    e: &Evaluated,
    stage: Stage,
) -> Result<(), RunError> {
    let name = classifier.name();
    match stage {
        Stage::Analyze => {
            let a = e.analytic.as_ref().expect("analytic stage");
            for (p, m) in e.patterns.iter().zip(&a.patterns) {
                w.serialize(AnalyticRow {
                    config_hash: hash,
                    seed: cfg.seed,
                    axis: cfg.sweep.axis,
                    value: point.value,
                    classifier: name,
                    pattern: p.id,
                    alpha: point.alpha,
                    mu: point.mu,
                    density: p.zeta_k,
                    busy_probability: p.p_b,
                    a_mu: m.a_mu,
                    outage: m.outage,
                    coverage: m.coverage,
                    selected_by_claim: a.by_claim.index == m.pattern,
                    selected_by_exhaustive: a.by_exhaustive.index == m.pattern,
                })?;
            }
        }
        Stage::Simulate => {
            let mc = e.mc.as_ref().expect("simulation stage");
            for (p, m) in e.patterns.iter().zip(mc) {
                w.serialize(SimulationRow {
                    config_hash: hash,
                    seed: cfg.seed,
                    axis: cfg.sweep.axis,
                    value: point.value,
                    mu: point.mu,
                    alpha: point.alpha,
                    classifier: name,
                    pattern: p.id,
                    density: p.zeta_k,
                    busy_probability: p.p_b,
                    trials: m.trials,
                    outage: m.outage,
                    outage_se: m.outage_se,
                    coverage: m.coverage,
                    coverage_se: m.coverage_se,
                    guarded: m.guarded,
                })?;
            }
        }
        Stage::Full => {
            let a = e.analytic.as_ref().expect("analytic stage");
            let mc = e.mc.as_ref().expect("simulation stage");
            for (rule, selection) in [("claim", &a.by_claim), ("exhaustive", &a.by_exhaustive)] {
                for ((p, m), s) in e.patterns.iter().zip(&a.patterns).zip(mc) {
                    w.serialize(ExperimentRow {
                        config_hash: hash,
                        seed: cfg.seed,
                        axis: cfg.sweep.axis,
                        value: point.value,
                        mu: point.mu,
                        alpha: point.alpha,
                        classifier: name,
                        rule,
                        pattern: p.id,
                        selected: selection.index == m.pattern,
                        portion: p.portion,
                        density: p.zeta_k,
                        busy_probability: p.p_b,
                        a_mu: m.a_mu,
                        outage: m.outage,
                        coverage: m.coverage,
                        mc_outage: s.outage,
                        mc_outage_se: s.outage_se,
                        mc_coverage: s.coverage,
                        mc_coverage_se: s.coverage_se,
                    })?;
                }
            }
        }
    }
    Ok(())
}

/// Writes the normalized config next to the results.
pub fn echo_config(cfg: &Normalized, out: &Path) -> Result<PathBuf, RunError> {
    io(
        || format!("creating {}", out.display()),
        fs::create_dir_all(out),
    )?;
    let path = out.join("config.normalized.json");
    io(
        || format!("writing {}", path.display()),
        fs::write(&path, cfg.to_json() + "\n"),
    )?;
    Ok(path)
}

/// Runs the sweep and writes one CSV into `out`. Rows are flushed after every
/// sweep value into a `.partial` file that is renamed once the sweep
/// completes; on failure the partial file stays behind.
pub fn run_experiment(cfg: &Normalized, out: &Path, stage: Stage) -> Result<PathBuf, RunError> {
    echo_config(cfg, out)?;
    let hash = cfg.hash();
    let final_path = out.join(stage.file_name());
    let partial = out.join(format!("{}.partial", stage.file_name()));
    let file = io(
        || format!("creating {}", partial.display()),
        File::create(&partial),
    )?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));

    let engine = core(
        || "building the analytic engine".into(),
        AnalyticEngine::with_options(
            cfg.budget,
            cfg.network.window_radius_m,
            Talbot::new(DEFAULT_NODES).expect("even node count"),
        ),
    )?;
    // Traces only change along a density sweep, so labels are reused
    // otherwise.
    let mut cached: Option<(Vec<TraceRecord>, Vec<Classification>)> = None;
    for point in sweep_points(cfg) {
        let at = |what: &str| format!("{what} at {:?} = {}", cfg.sweep.axis, point.value);
        if cfg.sweep.axis == SweepAxis::Density || cached.is_none() {
            let records = load_records(cfg, &point.specs)?;
            let labels = cfg
                .classifiers
                .iter()
                .map(|c| classify(cfg, *c, &records))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| annotate(e, &at("classification")))?;
            cached = Some((records, labels));
        }
        let (records, labels) = cached.as_ref().expect("filled above");
        for c in labels {
            let patterns = estimate_patterns(cfg, c, records)?;
            let loads: Vec<PatternLoad> = patterns
                .iter()
                .map(|p| PatternLoad {
                    zeta_k: p.zeta_k,
                    p_b: p.p_b,
                })
                .collect();
            let analytic = match stage {
                Stage::Simulate => None,
                _ => Some(core(
                    || at("analytic metrics"),
                    engine.scenario(point.alpha, point.mu, &loads),
                )?),
            };
            let mc = match stage {
                Stage::Analyze => None,
                _ => {
                    let mut sim = SimConfig::new(
                        cfg.budget,
                        point.mu,
                        point.alpha,
                        loads.iter().map(|l| l.zeta_k).collect(),
                        loads.iter().map(|l| l.p_b).collect(),
                    );
                    sim.window_radius = cfg.network.window_radius_m;
                    sim.origin_guard = cfg.network.origin_guard_m;
                    Some(core(
                        || at("Monte Carlo"),
                        mc_metrics(&sim, cfg.trials, cfg.seed),
                    )?)
                }
            };
            let e = Evaluated {
                patterns,
                analytic,
                mc,
            };
            write_rows(&mut writer, cfg, &hash, &point, c.classifier, &e, stage)?;
        }
        io(|| format!("writing {}", partial.display()), writer.flush())?;
    }
    drop(writer);
    io(
        || format!("renaming {}", partial.display()),
        fs::rename(&partial, &final_path),
    )?;
    Ok(final_path)
}

fn annotate(e: RunError, context: &str) -> RunError {
    match e {
        RunError::Core {
            context: inner,
            source,
        } => RunError::Core {
            context: format!("{context}: {inner}"),
            source,
        },
        other => other,
    }
}

/// Classifies the configured trace with every classifier and writes labels,
/// pattern estimates and Gibbs diagnostics.
pub fn run_classification(cfg: &Normalized, out: &Path) -> Result<Vec<PathBuf>, RunError> {
    echo_config(cfg, out)?;
    let specs: Vec<PatternSpec> = cfg.traffic.patterns.iter().map(|p| p.to_spec()).collect();
    let records = load_records(cfg, &specs)?;
    let hash = cfg.hash();
    let mut written = Vec::new();
    for &classifier in &cfg.classifiers {
        let c = classify(cfg, classifier, &records)?;
        let name = classifier.name();

        let path = out.join(format!("labels_{name}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["config_hash", "seed", "pu_id", "label"])?;
        for (pu, label) in c.pu_ids.iter().zip(&c.pu_labels) {
            w.write_record([
                hash.clone(),
                cfg.seed.to_string(),
                pu.to_string(),
                label.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        written.push(path);

        let path = out.join(format!("patterns_{name}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "config_hash",
            "seed",
            "pattern",
            "pus",
            "portion",
            "density",
            "busy_probability",
            "mean_airtime_s",
            "mean_interarrival_s",
            "clamped",
        ])?;
        for p in estimate_patterns(cfg, &c, &records)? {
            w.write_record([
                hash.clone(),
                cfg.seed.to_string(),
                p.id.to_string(),
                p.member_pus.len().to_string(),
                p.portion.to_string(),
                p.zeta_k.to_string(),
                p.p_b.to_string(),
                p.mean_airtime.to_string(),
                p.mean_interarrival.to_string(),
                p.clamped.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        written.push(path);

        if let Some(chain) = &c.chain {
            let path = out.join("chain_gibbs.csv");
            let file = io(
                || format!("creating {}", path.display()),
                File::create(&path),
            )?;
            core(
                || "writing chain diagnostics".into(),
                chain.write_diagnostics(BufWriter::new(file)),
            )?;
            written.push(path);
        }
    }
    Ok(written)
}
