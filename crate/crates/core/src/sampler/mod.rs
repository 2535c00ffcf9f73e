//! Hamiltonian Monte Carlo with multinomial trajectory sampling, step-size
//! dual averaging and diagonal mass-matrix adaptation.

mod adapt;
pub mod diagnostics;
mod nuts;
pub mod summary;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nuts::{run_hmc, run_hmc_fn};
pub use summary::{quantile_sorted, summarize, ParamSummary, Summary};

/// A differentiable log density on `R^dim`.
///
/// Implementations should return a non-finite value (rather than panic) where
/// the density is undefined; the sampler treats such points as divergent.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
    /// Writes the gradient into `grad` and returns the log density.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapts a pair of closures to [`LogDensity`].
pub struct FnTarget<F, G> {
    pub dim: usize,
    pub logp: F,
    pub grad: G,
}

impl<F, G> LogDensity for FnTarget<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (self.logp)(x)
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.grad)(x, grad);
        (self.logp)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub n_warmup: usize,
    pub n_draws: usize,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    pub seed: u64,
    /// Half-width multiplier of the uniform jitter added to the initial point
    /// (`jitter * U(-2, 2)` per coordinate).
    pub init_jitter: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_warmup: 1000,
            n_draws: 2000,
            target_accept: 0.8,
            max_leapfrog: 1024,
            seed: 0,
            init_jitter: 1.0,
        }
    }
}

impl ChainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_warmup < 100 {
            return Err(Error::Config(format!("n_warmup must be >= 100, got {}", self.n_warmup)));
        }
        if self.n_draws == 0 {
            return Err(Error::Config("n_draws must be >= 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if self.max_leapfrog == 0 {
            return Err(Error::Config("max_leapfrog must be >= 1".into()));
        }
        if !(self.init_jitter >= 0.0) {
            return Err(Error::Config("init_jitter must be non-negative".into()));
        }
        Ok(())
    }

    /// Tree depth implied by `max_leapfrog` (a depth-d tree has 2^d steps).
    pub fn max_depth(&self) -> usize {
        (usize::BITS - 1 - self.max_leapfrog.leading_zeros()) as usize
    }
}

/// Post-warmup draws on the unconstrained scale, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    values: Vec<f64>,
    dim: usize,
    pub names: Vec<String>,
    pub accept_rate: f64,
    pub divergence_count: usize,
    /// More than 10% of post-warmup transitions diverged.
    pub divergence_flag: bool,
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
    pub n_leapfrog: usize,
}

impl Draws {
    pub fn n_draws(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Stacks the draws of several chains of the same target. Scalar
    /// diagnostics are averaged (accept rate, step size) or summed.
    pub fn concat(chains: &[Draws]) -> Option<Draws> {
        let first = chains.first()?;
        if chains.iter().any(|c| c.dim != first.dim) {
            return None;
        }
        let k = chains.len() as f64;
        let divergences: usize = chains.iter().map(|c| c.divergence_count).sum();
        Some(Draws {
            values: chains.iter().flat_map(|c| c.values.iter().copied()).collect(),
            dim: first.dim,
            names: first.names.clone(),
            accept_rate: chains.iter().map(|c| c.accept_rate).sum::<f64>() / k,
            divergence_count: divergences,
            divergence_flag: chains.iter().any(|c| c.divergence_flag),
            step_size: chains.iter().map(|c| c.step_size).sum::<f64>() / k,
            inv_mass: first.inv_mass.clone(),
            n_leapfrog: chains.iter().map(|c| c.n_leapfrog).sum(),
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.dim, "one name per coordinate");
        self.names = names;
        self
    }
}
