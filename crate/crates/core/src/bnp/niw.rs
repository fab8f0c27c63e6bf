//! Normal-inverse-Wishart prior, sufficient statistics and the Student-t
//! posterior predictive.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, numerical, Result};

/// Hyperparameters of the base measure and the DP concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwHyperparams {
    /// Inverse-Wishart scale matrix.
    pub scale: DMatrix<f64>,
    /// Degrees of freedom, greater than `dim - 1`.
    pub dof: f64,
    pub mean: DVector<f64>,
    /// Prior pseudo-count on the mean.
    pub kappa: f64,
    /// Concentration of the Chinese restaurant process.
    pub concentration: f64,
}

impl NiwHyperparams {
    /// Identity scale, `dim + 1` degrees of freedom, zero mean,
    /// `kappa = 0.5` and concentration 1.
    pub fn standard(dim: usize) -> Self {
        Self {
            scale: DMatrix::identity(dim, dim),
            dof: dim as f64 + 1.0,
            mean: DVector::zeros(dim),
            kappa: 0.5,
            concentration: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.scale.nrows() != d || self.scale.ncols() != d {
            return Err(domain("scale matrix must be square and match the mean"));
        }
        if (&self.scale - self.scale.transpose()).amax() > 1e-12 * self.scale.amax().max(1.0) {
            return Err(domain("scale matrix must be symmetric"));
        }
        if Cholesky::new(self.scale.clone()).is_none() {
            return Err(domain("scale matrix must be positive definite"));
        }
        if !(self.dof > d as f64 - 1.0) {
            return Err(domain(format!(
                "degrees of freedom must exceed {}",
                d as f64 - 1.0
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(domain("kappa must be positive"));
        }
        if !(self.concentration > 0.0) {
            return Err(domain("concentration must be positive"));
        }
        Ok(())
    }
}

/// Count, mean and scatter matrix of a set of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub count: usize,
    pub mean: DVector<f64>,
    pub scatter: DMatrix<f64>,
}

impl SuffStats {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_points<'a>(dim: usize, points: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut s = Self::new(dim);
        for p in points {
            s.add(p);
        }
        s
    }

    pub fn add(&mut self, x: &[f64]) {
        let n = self.count as f64;
        let delta = DVector::from_column_slice(x) - &self.mean;
        self.count += 1;
        self.mean += &delta / (n + 1.0);
        self.scatter += &delta * delta.transpose() * (n / (n + 1.0));
    }

    pub fn remove(&mut self, x: &[f64]) {
        assert!(self.count > 0, "removing from empty statistics");
        if self.count == 1 {
            *self = Self::new(self.mean.len());
            return;
        }
        let n = self.count as f64;
        let x = DVector::from_column_slice(x);
        let mean_rest = (&self.mean * n - &x) / (n - 1.0);
        let delta = x - &mean_rest;
        self.scatter -= &delta * delta.transpose() * ((n - 1.0) / n);
        self.mean = mean_rest;
        self.count -= 1;
    }
}

/// NIW posterior after observing `stats`.
#[derive(Debug, Clone)]
pub struct NiwPosterior {
    pub kappa: f64,
    pub dof: f64,
    pub mean: DVector<f64>,
    pub scale: DMatrix<f64>,
}

impl NiwPosterior {
    pub fn new(h: &NiwHyperparams, stats: &SuffStats) -> Self {
        let n = stats.count as f64;
        if stats.count == 0 {
            return Self {
                kappa: h.kappa,
                dof: h.dof,
                mean: h.mean.clone(),
                scale: h.scale.clone(),
            };
        }
        let kappa = h.kappa + n;
        let diff = &stats.mean - &h.mean;
        let scale = &h.scale + &stats.scatter + &diff * diff.transpose() * (h.kappa * n / kappa);
        Self {
            kappa,
            dof: h.dof + n,
            mean: (&h.mean * h.kappa + &stats.mean * n) / kappa,
            scale,
        }
    }
}

/// Multivariate Student-t predictive of one cluster, ready for repeated
/// evaluation.
#[derive(Debug, Clone)]
pub struct Predictive {
    dof: f64,
    location: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl Predictive {
    pub fn new(h: &NiwHyperparams, stats: &SuffStats) -> Result<Self> {
        let post = NiwPosterior::new(h, stats);
        let d = h.dim() as f64;
        let dof = post.dof - d + 1.0;
        let shape = &post.scale * ((post.kappa + 1.0) / (post.kappa * dof));
        let chol = Cholesky::new(shape).ok_or_else(|| {
            numerical(format!(
                "posterior scale of a cluster with {} members is not positive definite",
                stats.count
            ))
        })?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let log_norm = ln_gamma(0.5 * (dof + d))
            - ln_gamma(0.5 * dof)
            - 0.5 * d * (dof * PI).ln()
            - 0.5 * log_det;
        Ok(Self {
            dof,
            location: post.mean,
            chol,
            log_norm,
        })
    }

    pub fn ln_pdf(&self, y: &[f64]) -> f64 {
        let d = self.location.len() as f64;
        let diff = DVector::from_column_slice(y) - &self.location;
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        self.log_norm - 0.5 * (self.dof + d) * (z.norm_squared() / self.dof).ln_1p()
    }
}

/// Density of `y` under the posterior predictive of the cluster
/// `members`.
pub fn posterior_predictive(y: &[f64], members: &[Vec<f64>], h: &NiwHyperparams) -> Result<f64> {
    h.validate()?;
    let stats = SuffStats::from_points(h.dim(), members.iter().map(|m| m.as_slice()));
    Ok(Predictive::new(h, &stats)?.ln_pdf(y).exp())
}

fn ln_multigamma(d: usize, a: f64) -> f64 {
    let d_f = d as f64;
    0.25 * d_f * (d_f - 1.0) * PI.ln() + (0..d).map(|j| ln_gamma(a - 0.5 * j as f64)).sum::<f64>()
}

/// Log marginal likelihood of the observations summarized by `stats`.
pub fn ln_marginal_likelihood(h: &NiwHyperparams, stats: &SuffStats) -> Result<f64> {
    if stats.count == 0 {
        return Ok(0.0);
    }
    let d = h.dim();
    let n = stats.count as f64;
    let post = NiwPosterior::new(h, stats);
    let ln_det = |m: &DMatrix<f64>| -> Result<f64> {
        let c = Cholesky::new(m.clone())
            .ok_or_else(|| numerical("scale matrix lost positive definiteness"))?;
        Ok(c.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum())
    };
    Ok(
        -0.5 * n * d as f64 * PI.ln() + ln_multigamma(d, 0.5 * post.dof)
            - ln_multigamma(d, 0.5 * h.dof)
            + 0.5 * h.dof * ln_det(&h.scale)?
            - 0.5 * post.dof * ln_det(&post.scale)?
            + 0.5 * d as f64 * (h.kappa / post.kappa).ln(),
    )
}
