use serde::{Deserialize, Serialize};

use super::{fit_model, mean};
use crate::designs::{gen_lognormal_sizes, pps_sample};
use crate::error::{Error, Result};
use crate::model::density::log_normal_pdf;
use crate::model::{Method, ModelKind, ModelSpec, Observation};
use crate::rng::derive_seed;
use crate::sampler::{quantile_sorted, summarize, ChainConfig, Summary};

const HIST_BINS: usize = 20;
const CURVE_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDistConfig {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub seed: u64,
    /// Multiplier applied to every population size before sampling.
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub chain: ChainConfig,
}

fn one() -> f64 {
    1.0
}

impl WeightDistConfig {
    pub fn new(big_n: usize, n: usize, seed: u64) -> Self {
        WeightDistConfig {
            big_n,
            n,
            seed,
            scale: 1.0,
            chain: ChainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub density: f64,
}

/// Histogram of the sampled log sizes with the population and fitted normal
/// densities of log size on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDistPlot {
    pub histogram: Vec<HistogramBin>,
    pub grid: Vec<f64>,
    pub population_density: Vec<f64>,
    pub fitted_density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDistResult {
    /// Summaries of `kappa` and `sigma_pi2` (the variance).
    pub summary: Summary,
    /// Central 99% intervals for `kappa` and `sigma_pi2`, in summary order.
    pub interval_99: Vec<[f64; 2]>,
    pub sampled_log_pi: Vec<f64>,
    pub plot: WeightDistPlot,
}

impl WeightDistResult {
    pub fn kappa_mean(&self) -> f64 {
        self.summary.get("kappa").map_or(f64::NAN, |s| s.mean)
    }

    pub fn sigma_pi2_mean(&self) -> f64 {
        self.summary.get("sigma_pi2").map_or(f64::NAN, |s| s.mean)
    }
}

/// Sizes `pi ~ lognormal(0, 1)` for `N` units, `n` drawn by PPS, and the
/// size-biased lognormal fit of the sampled sizes alone.
pub fn run_weight_dist_experiment(big_n: usize, n: usize, seed: u64) -> Result<WeightDistResult> {
    run_weight_dist_with(&WeightDistConfig::new(big_n, n, seed))
}

pub fn run_weight_dist_with(cfg: &WeightDistConfig) -> Result<WeightDistResult> {
    if cfg.n == 0 || cfg.n > cfg.big_n {
        return Err(Error::Config(format!(
            "need 0 < n <= N, got n={}, N={}",
            cfg.n, cfg.big_n
        )));
    }
    if !(cfg.scale > 0.0 && cfg.scale.is_finite()) {
        return Err(Error::Config(format!("scale must be positive, got {}", cfg.scale)));
    }
    let mut pop = gen_lognormal_sizes(cfg.big_n, 0.0, 1.0, derive_seed(cfg.seed, 1))?;
    for p in &mut pop.pi_raw {
        *p *= cfg.scale;
    }
    let sample = pps_sample(&pop.pi_raw, cfg.n, derive_seed(cfg.seed, 2))?;
    let data: Vec<Observation> = sample
        .indices
        .iter()
        .map(|&i| Observation::with_log_pi(0.0, pop.pi_raw[i].ln(), Vec::new(), vec![1.0]))
        .collect::<Result<_>>()?;

    let spec = ModelSpec::new(ModelKind::WeightsOnly, Method::Full);
    let (post, draws) = fit_model(&data, spec, &cfg.chain, derive_seed(cfg.seed, 10))?;
    let layout = post.layout().clone();
    let k = layout.kappa_x.start;
    let s = layout.sigma_pi.expect("weights-only layout has sigma_pi");
    let mut summary = summarize(&draws, |d| vec![d[k], (2.0 * d[s]).exp()]);
    summary.params[0].name = "kappa".into();
    summary.params[1].name = "sigma_pi2".into();
    let interval_99 = [k, s]
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let mut v: Vec<f64> = draws.rows().map(|d| if j == 0 { d[i] } else { (2.0 * d[i]).exp() }).collect();
            v.sort_by(f64::total_cmp);
            [quantile_sorted(&v, 0.005), quantile_sorted(&v, 0.995)]
        })
        .collect();

    let sampled_log_pi: Vec<f64> = data.iter().map(|o| o.log_pi).collect();
    let pop_log: Vec<f64> = pop.pi_raw.iter().map(|p| p.ln()).collect();
    let plot = plot_data(&sampled_log_pi, &pop_log, summary.params[0].mean, summary.params[1].mean);
    Ok(WeightDistResult {
        summary,
        interval_99,
        sampled_log_pi,
        plot,
    })
}

fn plot_data(sampled: &[f64], population: &[f64], kappa: f64, sigma2: f64) -> WeightDistPlot {
    let (lo, hi) = sampled
        .iter()
        .chain(population)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let width = (hi - lo) / HIST_BINS as f64;
    let mut counts = vec![0usize; HIST_BINS];
    for v in sampled {
        let b = (((v - lo) / width) as usize).min(HIST_BINS - 1);
        counts[b] += 1;
    }
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| HistogramBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            count: c,
            density: c as f64 / (sampled.len() as f64 * width),
        })
        .collect();

    // The population curve is the normal density with the population's
    // own log-size mean and variance.
    let pm = mean(population);
    let pv = population.iter().map(|v| (v - pm).powi(2)).sum::<f64>() / (population.len() as f64 - 1.0).max(1.0);
    let step = (hi - lo) / (CURVE_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..CURVE_POINTS).map(|i| lo + i as f64 * step).collect();
    WeightDistPlot {
        population_density: grid.iter().map(|&x| log_normal_pdf(x, pm, pv).exp()).collect(),
        fitted_density: grid.iter().map(|&x| log_normal_pdf(x, kappa, sigma2).exp()).collect(),
        histogram,
        grid,
    }
}
