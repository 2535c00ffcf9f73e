//! Synthetic finite populations and without-replacement sampling designs.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::sampler::ChainConfig;

/// A finite population with one covariate per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub y: Vec<f64>,
    pub pi_raw: Vec<f64>,
    pub x: Vec<f64>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[serde(alias = "slr-skewed")]
    SlrSkewed,
    #[serde(alias = "slr-symmetric")]
    SlrSymmetric,
    Nonlinear,
    #[serde(alias = "weights-only")]
    WeightsOnly,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::SlrSkewed => "slr_skewed",
            ScenarioKind::SlrSymmetric => "slr_symmetric",
            ScenarioKind::Nonlinear => "nonlinear",
            ScenarioKind::WeightsOnly => "weights_only",
        }
    }

    pub fn is_slr(self) -> bool {
        matches!(self, ScenarioKind::SlrSkewed | ScenarioKind::SlrSymmetric)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "slr_skewed" => Ok(ScenarioKind::SlrSkewed),
            "slr_symmetric" => Ok(ScenarioKind::SlrSymmetric),
            "nonlinear" | "non_linear" => Ok(ScenarioKind::Nonlinear),
            "weights_only" => Ok(ScenarioKind::WeightsOnly),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

fn default_beta_pi() -> f64 {
    1.0
}

/// One Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    /// Gamma rate of the inclusion sizes in the skewed scenarios.
    pub b_pi: f64,
    #[serde(rename = "M")]
    pub reps: usize,
    pub base_seed: u64,
    /// Coefficient of the size variable in the response; 0 makes the design
    /// non-informative.
    #[serde(default = "default_beta_pi")]
    pub beta_pi: f64,
    #[serde(default)]
    pub chain: ChainConfig,
}

impl ScenarioConfig {
    /// Desk-scale defaults for a scenario kind.
    pub fn desk(kind: ScenarioKind) -> Self {
        let (big_n, n, reps) = match kind {
            ScenarioKind::Nonlinear => (20_000, 100, 100),
            ScenarioKind::WeightsOnly => (100_000, 100, 1),
            _ => (20_000, 500, 200),
        };
        ScenarioConfig {
            kind,
            big_n,
            n,
            b_pi: 2.0,
            reps,
            base_seed: 17,
            beta_pi: 1.0,
            chain: ChainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n >= self.big_n {
            return Err(Error::Config(format!(
                "sample size must satisfy 0 < n < N, got n={}, N={}",
                self.n, self.big_n
            )));
        }
        if self.big_n < 10 {
            return Err(Error::Config("population size must be at least 10".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if !(self.b_pi > 0.0 && self.b_pi.is_finite()) {
            return Err(Error::Config(format!("b_pi must be positive, got {}", self.b_pi)));
        }
        if !self.beta_pi.is_finite() {
            return Err(Error::Config("beta_pi must be finite".into()));
        }
        self.chain.validate()
    }
}

/// Distinct, sorted population indices of a sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleIndex {
    pub indices: Vec<usize>,
}

impl SampleIndex {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Response coefficients of the linear scenarios: `y = b0 + b1 x + b_pi pi + e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlrTruth {
    pub beta0: f64,
    pub beta1: f64,
    pub beta_pi: f64,
    pub sigma_y: f64,
}

impl Default for SlrTruth {
    fn default() -> Self {
        SlrTruth {
            beta0: 0.0,
            beta1: 1.0,
            beta_pi: 1.0,
            sigma_y: 0.1,
        }
    }
}

const SYMMETRIC_PI_MEAN: f64 = 1.0;
const SYMMETRIC_PI_SD: f64 = 0.1;

pub fn gen_slr_population(big_n: usize, b_pi: f64, symmetric: bool, seed: u64) -> Result<Population> {
    gen_slr_population_with(big_n, b_pi, symmetric, SlrTruth::default(), seed)
}

pub fn gen_slr_population_with(
    big_n: usize,
    b_pi: f64,
    symmetric: bool,
    truth: SlrTruth,
    seed: u64,
) -> Result<Population> {
    if big_n < 10 {
        return Err(Error::domain("population size must be at least 10"));
    }
    let mut r = rng::stream(seed, 0x504f_50);
    let gamma = Gamma::new(2.0, 1.0 / b_pi).map_err(|e| Error::domain(format!("gamma(2, {b_pi}): {e}")))?;
    let trunc = Normal::new(SYMMETRIC_PI_MEAN, SYMMETRIC_PI_SD).expect("valid normal");
    let noise = Normal::new(0.0, truth.sigma_y).map_err(|e| Error::domain(e.to_string()))?;

    let mut pop = Population {
        y: Vec::with_capacity(big_n),
        pi_raw: Vec::with_capacity(big_n),
        x: Vec::with_capacity(big_n),
    };
    for _ in 0..big_n {
        let x: f64 = r.random();
        let pi = if symmetric {
            loop {
                let v = trunc.sample(&mut r);
                if v > 0.0 {
                    break v;
                }
            }
        } else {
            gamma.sample(&mut r)
        };
        let y = truth.beta0 + truth.beta1 * x + truth.beta_pi * pi + noise.sample(&mut r);
        pop.x.push(x);
        pop.pi_raw.push(pi);
        pop.y.push(y);
    }
    Ok(pop)
}

/// `y = x + pi - 0.5 x^2 + e`, `x ~ U(0, 2)`, `pi ~ gamma(2, 1)`, `sd(e) = 0.1`.
pub fn gen_nonlinear_population(big_n: usize, seed: u64) -> Result<Population> {
    if big_n < 10 {
        return Err(Error::domain("population size must be at least 10"));
    }
    let mut r = rng::stream(seed, 0x4e4c_50);
    let gamma = Gamma::new(2.0, 1.0).expect("valid gamma");
    let noise = Normal::new(0.0, 0.1).expect("valid normal");
    let mut pop = Population {
        y: Vec::with_capacity(big_n),
        pi_raw: Vec::with_capacity(big_n),
        x: Vec::with_capacity(big_n),
    };
    for _ in 0..big_n {
        let x = 2.0 * r.random::<f64>();
        let pi = gamma.sample(&mut r);
        let y = x + pi - 0.5 * x * x + noise.sample(&mut r);
        pop.x.push(x);
        pop.pi_raw.push(pi);
        pop.y.push(y);
    }
    Ok(pop)
}

/// `pi ~ lognormal(mu, sigma^2)` sizes; `y` and `x` are zero.
pub fn gen_lognormal_sizes(big_n: usize, mu: f64, sigma: f64, seed: u64) -> Result<Population> {
    let dist = LogNormal::new(mu, sigma).map_err(|e| Error::domain(e.to_string()))?;
    let mut r = rng::stream(seed, 0x4c4e_50);
    let pi_raw: Vec<f64> = (0..big_n).map(|_| dist.sample(&mut r)).collect();
    Ok(Population {
        y: vec![0.0; big_n],
        x: vec![0.0; big_n],
        pi_raw,
    })
}

/// First-order inclusion probabilities `min(1, n pi_i / sum pi)`, capping
/// units at 1 and redistributing the remaining sample size until none exceed 1.
pub fn inclusion_probabilities(pi_raw: &[f64], n: usize) -> Result<Vec<f64>> {
    let big_n = pi_raw.len();
    if n > big_n {
        return Err(Error::Design(format!("sample size {n} exceeds population size {big_n}")));
    }
    if let Some(bad) = pi_raw.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::Design(format!("size measures must be positive and finite, got {bad}")));
    }
    let mut capped = vec![false; big_n];
    let mut n_capped = 0usize;
    loop {
        let rest = (n - n_capped) as f64;
        let total: f64 = pi_raw
            .iter()
            .zip(&capped)
            .filter(|(_, c)| !**c)
            .map(|(p, _)| p)
            .sum();
        let mut newly = 0;
        for (p, c) in pi_raw.iter().zip(capped.iter_mut()) {
            if !*c && rest * p / total >= 1.0 {
                *c = true;
                newly += 1;
            }
        }
        n_capped += newly;
        if n_capped > n {
            return Err(Error::Design(format!(
                "{n_capped} units need certainty selection but n = {n}"
            )));
        }
        if newly == 0 || n_capped == n {
            let rest = (n - n_capped) as f64;
            return Ok(pi_raw
                .iter()
                .zip(&capped)
                .map(|(p, c)| if *c { 1.0 } else { rest * p / total })
                .collect());
        }
    }
}

/// Fixed-size PPS sample without replacement: certainty units first, then
/// systematic selection over a random permutation of the others.
pub fn pps_sample(pi_raw: &[f64], n: usize, seed: u64) -> Result<SampleIndex> {
    let probs = inclusion_probabilities(pi_raw, n)?;
    let mut r = rng::stream(seed, 0x505053);
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut order: Vec<usize> = Vec::with_capacity(probs.len());
    for (i, p) in probs.iter().enumerate() {
        if *p >= 1.0 {
            chosen.push(i);
        } else {
            order.push(i);
        }
    }
    let rest = n - chosen.len();
    if rest > 0 {
        order.shuffle(&mut r);
        let total: f64 = order.iter().map(|&i| probs[i]).sum();
        let scale = rest as f64 / total;
        let u: f64 = r.random();
        let mut next = u;
        let mut cum = 0.0;
        for (pos, &i) in order.iter().enumerate() {
            cum = if pos + 1 == order.len() {
                rest as f64
            } else {
                cum + probs[i] * scale
            };
            if next < cum {
                chosen.push(i);
                while next < cum {
                    next += 1.0;
                }
            }
        }
    }
    if chosen.len() != n {
        return Err(Error::Design(format!(
            "systematic selection returned {} units instead of {n}",
            chosen.len()
        )));
    }
    chosen.sort_unstable();
    Ok(SampleIndex { indices: chosen })
}

/// Simple random sample without replacement (partial Fisher-Yates).
pub fn srs_sample(big_n: usize, n: usize, seed: u64) -> Result<SampleIndex> {
    if n > big_n {
        return Err(Error::domain(format!("sample size {n} exceeds population size {big_n}")));
    }
    let mut r = rng::stream(seed, 0x535253);
    let mut idx: Vec<usize> = (0..big_n).collect();
    for i in 0..n {
        let j = r.random_range(i..big_n);
        idx.swap(i, j);
    }
    idx.truncate(n);
    idx.sort_unstable();
    Ok(SampleIndex { indices: idx })
}
