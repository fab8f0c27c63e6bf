//! Collapsed Gibbs sampler for the Dirichlet-process Gaussian mixture.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Gamma};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::crp::crp_ln_prob;
use super::niw::{ln_marginal_likelihood, NiwHyperparams, Predictive, SuffStats};
use crate::error::{domain, Result};

/// Labels are zero-based and compact: every label below
/// `cluster_count()` is used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterState {
    pub labels: Vec<usize>,
    pub concentration: f64,
    pub iteration: usize,
}

impl ClusterState {
    /// Everything in one cluster.
    pub fn single(len: usize, concentration: f64) -> Self {
        Self {
            labels: vec![0; len],
            concentration,
            iteration: 0,
        }
    }

    /// Labels drawn sequentially from the restaurant process.
    pub fn from_prior<R: Rng + ?Sized>(len: usize, concentration: f64, rng: &mut R) -> Self {
        let mut counts: Vec<usize> = Vec::new();
        let mut labels = Vec::with_capacity(len);
        for _ in 0..len {
            let weights = counts.iter().map(|c| *c as f64).chain([concentration]);
            let k = WeightedIndex::new(weights)
                .expect("positive weights")
                .sample(rng);
            if k == counts.len() {
                counts.push(0);
            }
            counts[k] += 1;
            labels.push(k);
        }
        Self {
            labels,
            concentration,
            iteration: 0,
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.cluster_count()];
        for l in &self.labels {
            c[*l] += 1;
        }
        c
    }

    /// Whether every label in `0..cluster_count()` is occupied.
    pub fn is_compact(&self) -> bool {
        self.counts().iter().all(|c| *c > 0)
    }

    /// Relabels clusters in order of first appearance.
    pub fn compact(&mut self) {
        let mut map: Vec<Option<usize>> = vec![None; self.cluster_count()];
        let mut next = 0;
        for l in &mut self.labels {
            let new = *map[*l].get_or_insert_with(|| {
                next += 1;
                next - 1
            });
            *l = new;
        }
    }
}

/// Sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GibbsOptions {
    /// Resample the concentration after every sweep.
    pub resample_concentration: bool,
    /// Gamma(shape, rate) prior on the concentration.
    pub concentration_shape: f64,
    pub concentration_rate: f64,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            resample_concentration: true,
            concentration_shape: 1.0,
            concentration_rate: 1.0,
        }
    }
}

/// Sampler state with cached per-cluster statistics.
pub struct GibbsSampler<'a> {
    data: &'a [Vec<f64>],
    hyper: &'a NiwHyperparams,
    options: GibbsOptions,
    state: ClusterState,
    stats: Vec<SuffStats>,
    predictive: Vec<Predictive>,
    prior: Predictive,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        data: &'a [Vec<f64>],
        hyper: &'a NiwHyperparams,
        options: GibbsOptions,
        mut state: ClusterState,
    ) -> Result<Self> {
        hyper.validate()?;
        let dim = hyper.dim();
        if let Some(bad) = data.iter().position(|y| y.len() != dim) {
            return Err(domain(format!("observation {bad} has the wrong dimension")));
        }
        if state.labels.len() != data.len() {
            return Err(domain("state and data lengths differ"));
        }
        if !(state.concentration > 0.0) {
            return Err(domain("concentration must be positive"));
        }
        if options.resample_concentration
            && !(options.concentration_shape > 0.0 && options.concentration_rate > 0.0)
        {
            return Err(domain(
                "concentration prior must have positive shape and rate",
            ));
        }
        state.compact();
        let mut stats = vec![SuffStats::new(dim); state.cluster_count()];
        for (y, l) in data.iter().zip(&state.labels) {
            stats[*l].add(y);
        }
        let predictive = stats
            .iter()
            .map(|s| Predictive::new(hyper, s))
            .collect::<Result<Vec<_>>>()?;
        let prior = Predictive::new(hyper, &SuffStats::new(dim))?;
        Ok(Self {
            data,
            hyper,
            options,
            state,
            stats,
            predictive,
            prior,
        })
    }

    pub fn state(&self) -> &ClusterState {
        &self.state
    }

    pub fn into_state(self) -> ClusterState {
        self.state
    }

    fn refresh(&mut self, k: usize) -> Result<()> {
        self.predictive[k] = Predictive::new(self.hyper, &self.stats[k])?;
        Ok(())
    }

    fn detach(&mut self, r: usize) -> Result<()> {
        let k = self.state.labels[r];
        self.stats[k].remove(&self.data[r]);
        self.refresh(k)
    }

    /// Log of the unnormalized conditional for each cluster slot and a new
    /// cluster (last entry). Empty slots get `-inf`. Point `r` must be
    /// detached.
    fn log_weights(&self, r: usize) -> Vec<f64> {
        let y = &self.data[r];
        let mut w: Vec<f64> = self
            .stats
            .iter()
            .zip(&self.predictive)
            .map(|(s, p)| {
                if s.count == 0 {
                    f64::NEG_INFINITY
                } else {
                    (s.count as f64).ln() + p.ln_pdf(y)
                }
            })
            .collect();
        w.push(self.state.concentration.ln() + self.prior.ln_pdf(y));
        w
    }

    /// Normalized assignment probabilities of point `r` given all others:
    /// clusters in label order, then a new cluster. A cluster holding only
    /// `r` gets probability 0, its mass going to the new-cluster entry.
    pub fn assignment_probabilities(&mut self, r: usize) -> Result<Vec<f64>> {
        self.detach(r)?;
        let mut w = self.log_weights(r);
        normalize_log(&mut w);
        let k = self.state.labels[r];
        self.stats[k].add(&self.data[r]);
        self.refresh(k)?;
        Ok(w)
    }

    /// One pass over all points, followed by compaction and the
    /// concentration update.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for r in 0..self.data.len() {
            self.detach(r)?;
            let mut w = self.log_weights(r);
            normalize_log(&mut w);
            let choice = WeightedIndex::new(&w)
                .expect("normalized weights")
                .sample(rng);
            let k = if choice == self.stats.len() {
                match self.stats.iter().position(|s| s.count == 0) {
                    Some(empty) => empty,
                    None => {
                        self.stats.push(SuffStats::new(self.hyper.dim()));
                        self.predictive.push(self.prior.clone());
                        self.stats.len() - 1
                    }
                }
            } else {
                choice
            };
            self.state.labels[r] = k;
            self.stats[k].add(&self.data[r]);
            self.refresh(k)?;
        }
        self.compact();
        if self.options.resample_concentration {
            self.state.concentration = escobar_west(
                self.state.concentration,
                self.stats.len(),
                self.data.len(),
                self.options.concentration_shape,
                self.options.concentration_rate,
                rng,
            );
        }
        self.state.iteration += 1;
        Ok(())
    }

    fn compact(&mut self) {
        let keep: Vec<usize> = (0..self.stats.len())
            .filter(|k| self.stats[*k].count > 0)
            .collect();
        let mut map = vec![usize::MAX; self.stats.len()];
        for (new, old) in keep.iter().enumerate() {
            map[*old] = new;
        }
        for l in &mut self.state.labels {
            *l = map[*l];
        }
        self.stats = keep.iter().map(|k| self.stats[*k].clone()).collect();
        self.predictive = keep.iter().map(|k| self.predictive[*k].clone()).collect();
    }

    /// Log joint density of data, partition and concentration, up to a
    /// constant.
    pub fn log_score(&self) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.stats {
            total += ln_marginal_likelihood(self.hyper, s)?;
        }
        let counts: Vec<usize> = self.stats.iter().map(|s| s.count).collect();
        let alpha = self.state.concentration;
        total += crp_ln_prob(&counts, alpha);
        if self.options.resample_concentration {
            let (a, b) = (
                self.options.concentration_shape,
                self.options.concentration_rate,
            );
            total += a * b.ln() - ln_gamma(a) + (a - 1.0) * alpha.ln() - b * alpha;
        }
        Ok(total)
    }
}

fn normalize_log(w: &mut [f64]) {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in w.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
}

/// Auxiliary-variable update of the concentration under a Gamma(shape,
/// rate) prior given `clusters` clusters over `n` observations.
pub fn escobar_west<R: Rng + ?Sized>(
    alpha: f64,
    clusters: usize,
    n: usize,
    shape: f64,
    rate: f64,
    rng: &mut R,
) -> f64 {
    let eta: f64 = Beta::new(alpha + 1.0, n as f64)
        .expect("positive parameters")
        .sample(rng);
    let rate_post = rate - eta.ln();
    let k = clusters as f64;
    let odds = (shape + k - 1.0) / (n as f64 * rate_post);
    let use_upper = rng.random::<f64>() < odds / (1.0 + odds);
    let shape_post = if use_upper || shape + k - 1.0 <= 0.0 {
        shape + k
    } else {
        shape + k - 1.0
    };
    Gamma::new(shape_post, 1.0 / rate_post)
        .expect("positive parameters")
        .sample(rng)
}

/// One sweep starting from `state`.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: ClusterState,
    data: &[Vec<f64>],
    hyper: &NiwHyperparams,
    options: GibbsOptions,
    rng: &mut R,
) -> Result<ClusterState> {
    let mut s = GibbsSampler::new(data, hyper, options, state)?;
    s.sweep(rng)?;
    Ok(s.into_state())
}

/// Starting partition of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum InitialPartition {
    /// All observations in one cluster.
    Single,
    /// A draw from the restaurant-process prior.
    Prior,
    /// Labels drawn uniformly from `0..n` for `n` observations.
    #[default]
    Uniform,
}

/// Chain length, seed and starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub options: GibbsOptions,
    pub init: InitialPartition,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            sweeps: 500,
            burn_in: 100,
            seed: 0,
            options: GibbsOptions::default(),
            init: InitialPartition::default(),
        }
    }
}

/// Summary of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepDiagnostics {
    pub sweep: usize,
    pub clusters: usize,
    pub log_score: f64,
    pub concentration: f64,
}

/// Output of [`run_chain`].
#[derive(Debug, Clone)]
pub struct ChainResult {
    /// Every sweep, burn-in included.
    pub diagnostics: Vec<SweepDiagnostics>,
    /// Labels of the retained (post burn-in) sweeps.
    pub samples: Vec<Vec<usize>>,
    /// Index into `samples` of the highest-scoring sweep (earliest on ties).
    pub map_index: usize,
}

impl ChainResult {
    pub fn map_labels(&self) -> &[usize] {
        &self.samples[self.map_index]
    }

    pub fn map_clusters(&self) -> usize {
        self.retained()[self.map_index].clusters
    }

    pub fn retained(&self) -> &[SweepDiagnostics] {
        &self.diagnostics[self.diagnostics.len() - self.samples.len()..]
    }

    pub fn write_diagnostics(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sweep", "K", "log_score", "alpha"])?;
        for d in &self.diagnostics {
            w.write_record([
                d.sweep.to_string(),
                d.clusters.to_string(),
                d.log_score.to_string(),
                d.concentration.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs a chain and keeps the post burn-in sweeps.
pub fn run_chain(
    data: &[Vec<f64>],
    hyper: &NiwHyperparams,
    config: ChainConfig,
) -> Result<ChainResult> {
    if config.sweeps <= config.burn_in {
        return Err(domain(format!(
            "sweeps ({}) must exceed burn-in ({})",
            config.sweeps, config.burn_in
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = match config.init {
        InitialPartition::Single => ClusterState::single(data.len(), hyper.concentration),
        InitialPartition::Prior => {
            ClusterState::from_prior(data.len(), hyper.concentration, &mut rng)
        }
        InitialPartition::Uniform => ClusterState {
            labels: (0..data.len())
                .map(|_| rng.random_range(0..data.len()))
                .collect(),
            concentration: hyper.concentration,
            iteration: 0,
        },
    };
    let mut sampler = GibbsSampler::new(data, hyper, config.options, init)?;
    let mut diagnostics = Vec::with_capacity(config.sweeps);
    let mut samples = Vec::with_capacity(config.sweeps - config.burn_in);
    let mut map_index = 0;
    let mut best = f64::NEG_INFINITY;
    for sweep in 0..config.sweeps {
        sampler.sweep(&mut rng)?;
        let log_score = sampler.log_score()?;
        diagnostics.push(SweepDiagnostics {
            sweep,
            clusters: sampler.stats.len(),
            log_score,
            concentration: sampler.state.concentration,
        });
        if sweep >= config.burn_in {
            if log_score > best {
                best = log_score;
                map_index = samples.len();
            }
            samples.push(sampler.state.labels.clone());
        }
    }
    Ok(ChainResult {
        diagnostics,
        samples,
        map_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand_distr::StandardNormal;

    fn blobs(seed: u64, per: usize, centres: &[[f64; 3]], sd: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        centres
            .iter()
            .flat_map(|c| {
                (0..per)
                    .map(|_| {
                        c.iter()
                            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
                            .collect()
                    })
                    .collect::<Vec<Vec<f64>>>()
            })
            .collect()
    }

    fn reference_hyper() -> NiwHyperparams {
        NiwHyperparams {
            dof: 4.0,
            ..NiwHyperparams::standard(3)
        }
    }

    #[test]
    fn compaction_orders_by_first_use() {
        let mut s = ClusterState {
            labels: vec![4, 2, 4, 7],
            concentration: 1.0,
            iteration: 0,
        };
        assert!(!s.is_compact());
        s.compact();
        assert_eq!(s.labels, vec![0, 1, 0, 2]);
        assert!(s.is_compact());
    }

    #[test]
    fn probabilities_are_normalized() {
        let data = blobs(1, 10, &[[0.0; 3], [20.0; 3]], 1.0);
        let h = reference_hyper();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let init = ClusterState::from_prior(data.len(), 1.0, &mut rng);
        let mut s = GibbsSampler::new(&data, &h, GibbsOptions::default(), init).unwrap();
        for r in 0..data.len() {
            let p = s.assignment_probabilities(r).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_point_prefers_its_twin() {
        let data = vec![vec![0.3], vec![0.3]];
        let h = NiwHyperparams {
            scale: DMatrix::from_element(1, 1, 1.0),
            dof: 4.0,
            mean: DVector::zeros(1),
            kappa: 0.5,
            concentration: 1.0,
        };
        let state = ClusterState::single(2, 1.0);
        let mut s = GibbsSampler::new(&data, &h, GibbsOptions::default(), state).unwrap();
        let p = s.assignment_probabilities(1).unwrap();
        // Exact two-point enumeration.
        let with_twin = Predictive::new(&h, &SuffStats::from_points(1, [[0.3].as_slice()]))
            .unwrap()
            .ln_pdf(&[0.3])
            .exp();
        let alone = Predictive::new(&h, &SuffStats::new(1))
            .unwrap()
            .ln_pdf(&[0.3])
            .exp();
        let exact = with_twin / (with_twin + alone);
        assert!((p[0] - exact).abs() < 1e-12);
        assert!(p[0] >= 1.0 / (1.0 + 1.0));
    }

    #[test]
    fn separated_blobs_give_two_clusters() {
        let h = reference_hyper();
        let mut hits = 0;
        for seed in 0..20 {
            // Spread well below the prior scale, so stray singletons are improbable.
            let data = blobs(seed, 50, &[[0.0; 3], [2.0, 0.0, 0.0]], 0.1);
            let cfg = ChainConfig {
                sweeps: 50,
                burn_in: 10,
                seed,
                ..ChainConfig::default()
            };
            if run_chain(&data, &h, cfg).unwrap().map_clusters() == 2 {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}");
    }

    #[test]
    fn chain_boundaries_and_determinism() {
        let data = blobs(3, 10, &[[0.0; 3], [8.0; 3]], 1.0);
        let h = reference_hyper();
        let cfg = ChainConfig {
            sweeps: 6,
            burn_in: 5,
            seed: 9,
            ..ChainConfig::default()
        };
        let a = run_chain(&data, &h, cfg).unwrap();
        assert_eq!(a.samples.len(), 1);
        assert_eq!(a.diagnostics.len(), 6);
        let b = run_chain(&data, &h, cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.diagnostics, b.diagnostics);
        assert!(run_chain(&data, &h, ChainConfig { sweeps: 5, ..cfg }).is_err());
    }

    #[test]
    fn labels_stay_compact() {
        let data = blobs(4, 15, &[[0.0; 3], [5.0; 3], [10.0; 3]], 1.5);
        let h = reference_hyper();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut state = ClusterState::from_prior(data.len(), 1.0, &mut rng);
        for _ in 0..20 {
            state = gibbs_sweep(state, &data, &h, GibbsOptions::default(), &mut rng).unwrap();
            assert!(state.is_compact());
            assert_eq!(state.labels.len(), data.len());
        }
        assert_eq!(state.iteration, 20);
    }

    #[test]
    fn concentration_update_tracks_cluster_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mean = |k: usize, rng: &mut ChaCha8Rng| {
            let mut a = 1.0;
            let mut total = 0.0;
            for _ in 0..4000 {
                a = escobar_west(a, k, 200, 1.0, 1.0, rng);
                total += a;
            }
            total / 4000.0
        };
        let few = mean(2, &mut rng);
        let many = mean(30, &mut rng);
        assert!(many > 3.0 * few, "{few} {many}");
    }
}
