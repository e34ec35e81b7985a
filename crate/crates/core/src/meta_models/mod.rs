//! Mixture models over observed effect sizes.
//!
//! The three-layer model treats each experiment's observed effect `d_i` as
//! `N(μ_k, τ²_k + σ²_i)` given its cluster `k`, where `σ²_i` is the known
//! sampling variance. Setting every `σ²_i` to zero gives the ordinary
//! (two-layer) Gaussian mixture; `K = 1` gives the random-effects pooled
//! model.

mod aes;
mod em;
mod fit;
mod pooled;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aes::extract_aes;
pub use em::{component_density, e_step, m_step, penalized_loglik};
pub use fit::{fit, FitOutcome, InitKind, RunSummary};
pub use pooled::{fit_pooled, PooledFit};

/// Index of the flat component when its mean is pinned at zero.
pub const FLAT_INDEX: usize = 1;

/// An observed effect size with its known sampling variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub d: f64,
    pub se2: f64,
}

impl Observation {
    pub fn new(d: f64, se2: f64) -> Self {
        Observation { d, se2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub comp_vars: Vec<f64>,
    pub penalized_loglik: f64,
    pub n_iterations: usize,
    pub converged: bool,
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, comp_vars: Vec<f64>) -> Result<Self> {
        let p = MixtureParams {
            k: weights.len(),
            weights,
            means,
            comp_vars,
            penalized_loglik: f64::NAN,
            n_iterations: 0,
            converged: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if k == 0 || self.weights.len() != k || self.means.len() != k || self.comp_vars.len() != k {
            return Err(Error::domain(format!(
                "mixture with K={k} has {} weights, {} means, {} variances",
                self.weights.len(),
                self.means.len(),
                self.comp_vars.len()
            )));
        }
        if self.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::domain(format!("weights outside [0, 1]: {:?}", self.weights)));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("weights sum to {total}, not 1")));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::domain(format!("non-finite means: {:?}", self.means)));
        }
        if self.comp_vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!(
                "component variances must be positive: {:?}",
                self.comp_vars
            )));
        }
        Ok(())
    }

    /// Reorders components by `perm`, where `perm[new] = old`.
    pub(crate) fn permute(&mut self, perm: &[usize]) {
        self.weights = perm.iter().map(|&i| self.weights[i]).collect();
        self.means = perm.iter().map(|&i| self.means[i]).collect();
        self.comp_vars = perm.iter().map(|&i| self.comp_vars[i]).collect();
    }
}

/// Posterior cluster probabilities, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Responsibilities {
    k: usize,
    values: Vec<f64>,
}

impl Responsibilities {
    pub(crate) fn from_rows(k: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len() % k, 0);
        Responsibilities { k, values }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_obs(&self) -> usize {
        self.values.len() / self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.k + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.k)
    }

    /// Responsibility column for component `k`.
    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(k).step_by(self.k).copied()
    }
}

/// EM controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub k: usize,
    /// Pin the mean of component 2 (index 1) at zero.
    pub fix_flat_mean: bool,
    /// Use each observation's `σ²_i`; false treats them all as zero.
    pub heteroscedastic: bool,
    pub penalized: bool,
    /// Convergence threshold on the change in penalized log-likelihood / m.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub n_starts: usize,
    pub kmeans_start: bool,
    pub inner_tolerance: f64,
    pub var_floor: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 3,
            fix_flat_mean: true,
            heteroscedastic: true,
            penalized: true,
            tolerance: 1e-3,
            max_iterations: 500,
            n_starts: 10,
            kmeans_start: true,
            inner_tolerance: 1e-8,
            var_floor: 1e-10,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Three-layer heteroscedastic model with the flat mean pinned at zero.
    pub fn three_layer() -> Self {
        FitConfig::default()
    }

    /// Ordinary Gaussian mixture on `d` alone, no mean constraint.
    pub fn two_layer() -> Self {
        FitConfig {
            fix_flat_mean: false,
            heteroscedastic: false,
            ..FitConfig::default()
        }
    }

    /// Random-effects model: one component, no penalty.
    pub fn pooled() -> Self {
        FitConfig {
            k: 1,
            fix_flat_mean: false,
            penalized: false,
            ..FitConfig::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("K must be at least 1"));
        }
        if self.fix_flat_mean && self.k <= FLAT_INDEX {
            return Err(Error::config("fix_flat_mean needs K >= 2"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("tolerance must be positive"));
        }
        if !(self.inner_tolerance > 0.0) {
            return Err(Error::config("inner_tolerance must be positive"));
        }
        if !(self.var_floor > 0.0) {
            return Err(Error::config("var_floor must be positive"));
        }
        if self.n_starts == 0 {
            return Err(Error::config("n_starts must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn check_observations(data: &[Observation]) -> Result<()> {
    for (i, o) in data.iter().enumerate() {
        if !o.d.is_finite() {
            return Err(Error::data(format!("observation {i}: effect is not finite ({})", o.d)));
        }
        if !(o.se2 >= 0.0 && o.se2.is_finite()) {
            return Err(Error::data(format!(
                "observation {i}: variance must be finite and non-negative ({})",
                o.se2
            )));
        }
    }
    Ok(())
}

/// Population variance of the observed effects.
pub(crate) fn effect_variance(data: &[Observation]) -> f64 {
    let m = data.len() as f64;
    let mean = data.iter().map(|o| o.d).sum::<f64>() / m;
    data.iter().map(|o| (o.d - mean).powi(2)).sum::<f64>() / m
}
