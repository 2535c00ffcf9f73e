//! Monte Carlo studies: replicate fits, aggregation and the size-distribution
//! experiment.

mod curve;
mod study;
mod weights;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Observation, Posterior};
use crate::rng::derive_seed;
use crate::sampler::{run_hmc, ChainConfig, Draws, LogDensity};

pub use curve::{
    curve_grid, curve_truth, run_curve_replicate, run_curve_study, run_curve_study_with_threads, CurveMetrics,
    CurveReplicate, MethodCurve,
};
pub use study::{run_replicate, run_study, run_study_with_threads, MethodMetrics, MetricsTable, ReplicateResult};
pub use weights::{
    run_weight_dist_experiment, run_weight_dist_with, HistogramBin, WeightDistConfig, WeightDistPlot, WeightDistResult,
};

/// Analysis labels in a study: full and pseudo on the informative sample,
/// the unadjusted model on the simple random sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyMethod {
    Full,
    Pseudo,
    Srs,
}

impl StudyMethod {
    pub const ALL: [StudyMethod; 3] = [StudyMethod::Full, StudyMethod::Pseudo, StudyMethod::Srs];

    pub fn as_str(self) -> &'static str {
        match self {
            StudyMethod::Full => "full",
            StudyMethod::Pseudo => "pseudo",
            StudyMethod::Srs => "srs",
        }
    }
}

impl fmt::Display for StudyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Worker count from `ISAMP_THREADS`, else the machine's parallelism.
pub fn worker_count() -> usize {
    std::env::var("ISAMP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Neumaier-compensated sum; callers pass values in replicate order.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    neumaier_sum(values.iter().copied()) / values.len() as f64
}

/// Compensated mean, as used for every study aggregate.
pub fn mean_of(values: &[f64]) -> f64 {
    mean(values)
}

/// Fits `spec` to `data` from a jittered zero start. An initialization
/// failure is retried once with a fresh seed.
pub fn fit_model(data: &[Observation], spec: ModelSpec, chain: &ChainConfig, seed: u64) -> Result<(Posterior, Draws)> {
    let posterior = Posterior::new(data, spec)?;
    let init = vec![0.0; posterior.dim()];
    let names = posterior.layout().names();
    let first = ChainConfig {
        seed: derive_seed(seed, 0),
        ..chain.clone()
    };
    let draws = match run_hmc(&posterior, &init, &first) {
        Err(Error::Init(_)) => {
            let retry = ChainConfig {
                seed: derive_seed(seed, 1),
                init_jitter: chain.init_jitter.max(1.0),
                ..chain.clone()
            };
            run_hmc(&posterior, &init, &retry)?
        }
        other => other?,
    };
    Ok((posterior, draws.with_names(names)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let v = [1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(v), 1.0);
        assert_eq!(mean(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }

    #[test]
    fn method_labels() {
        assert_eq!(serde_json::to_string(&StudyMethod::Srs).unwrap(), "\"srs\"");
        assert_eq!(StudyMethod::ALL.map(|m| m.to_string()), ["full", "pseudo", "srs"]);
    }
}
