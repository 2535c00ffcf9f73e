use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Command, RunConfig};
use super::dataset::{load_dataset, Dataset};
use super::report::{read_run_record, write_report, write_run_record, RunRecord, RunResult};
use super::version_string;
use crate::designs::ScenarioKind;
use crate::error::{Error, Result};
use crate::harness::{
    build_pool, fit_model, run_curve_study_with_threads, run_study_with_threads, run_weight_dist_with, worker_count,
};
use crate::model::{Method, ModelKind, ModelSpec};
use crate::rng::derive_seed;
use crate::sampler::diagnostics::split_rhat;
use crate::sampler::{quantile_sorted, summarize, Draws, Summary};

const CURVE_POINTS: usize = 101;

/// Posterior mean curve of the spline term with pointwise 95% intervals;
/// other covariates are held at zero (reference levels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCurve {
    pub column: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub method: Method,
    pub n_obs: usize,
    pub dropped_missing: usize,
    pub dropped_weight: usize,
    pub chains: usize,
    pub accept_rate: f64,
    pub divergences: usize,
    /// Constrained scale: scale parameters are reported as standard deviations.
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhat: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<FitCurve>,
}

fn display_names(layout_names: &[String], ds: &Dataset) -> Vec<String> {
    layout_names
        .iter()
        .map(|n| {
            let relabel = |prefix: &str, names: &[String]| -> Option<String> {
                let j: usize = n.strip_prefix(prefix)?.strip_suffix(']')?.parse().ok()?;
                names.get(j).map(|c| format!("{}{c}]", prefix))
            };
            relabel("beta[", &ds.y_names)
                .or_else(|| relabel("kappa_x[", &ds.pi_names))
                .unwrap_or_else(|| n.clone())
        })
        .collect()
}

fn run_fit(config: &RunConfig, threads: usize) -> Result<FitResult> {
    let spec = config.dataset.as_ref().expect("validated");
    let ds = load_dataset(spec)?;
    let model_spec = match config.model {
        ModelKind::Spline => {
            if ds.basis.is_none() {
                return Err(Error::Config("the spline model needs a spline column".into()));
            }
            ModelSpec::spline(config.method, spec.spline_bases, spec.spline_penalty_order)
        }
        kind => ModelSpec::new(kind, config.method),
    };

    let pool = build_pool(threads)?;
    let fits: Vec<Result<Draws>> = pool.install(|| {
        (0..config.chains)
            .into_par_iter()
            .map(|c| {
                fit_model(&ds.observations, model_spec, &config.chain, derive_seed(config.chain.seed, c as u64))
                    .map(|(_, d)| d)
            })
            .collect()
    });
    let chains: Vec<Draws> = fits.into_iter().collect::<Result<_>>()?;
    let layout = crate::model::Posterior::new(&ds.observations, model_spec)?.layout().clone();
    let names = display_names(&layout.names(), &ds);
    let all = Draws::concat(&chains).expect("at least one chain").with_names(names);
    let summary = summarize(&all, |d| layout.constrain(d));

    let rhat = (config.chains > 1).then(|| {
        (0..layout.dim())
            .map(|j| {
                let per_chain: Vec<Vec<f64>> = chains
                    .iter()
                    .map(|c| c.rows().map(|r| layout.constrain(r)[j]).collect())
                    .collect();
                split_rhat(&per_chain)
            })
            .collect()
    });

    let curve = match (&ds.basis, &spec.spline_column, config.model) {
        (Some(basis), Some(col), ModelKind::Spline) => {
            let (lo, hi) = basis.span();
            let beta = layout.beta.start..layout.beta.start + basis.dim();
            let mut c = FitCurve {
                column: col.clone(),
                x: Vec::new(),
                mean: Vec::new(),
                lo: Vec::new(),
                hi: Vec::new(),
            };
            for i in 0..CURVE_POINTS {
                let x = lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64;
                let row = basis.eval_row(x);
                let mut vals: Vec<f64> = all
                    .rows()
                    .map(|d| row.iter().zip(&d[beta.clone()]).map(|(a, b)| a * b).sum())
                    .collect();
                c.x.push(x);
                c.mean.push(crate::harness::mean_of(&vals));
                vals.sort_by(f64::total_cmp);
                c.lo.push(quantile_sorted(&vals, 0.025));
                c.hi.push(quantile_sorted(&vals, 0.975));
            }
            Some(c)
        }
        _ => None,
    };

    Ok(FitResult {
        model: config.model,
        method: config.method,
        n_obs: ds.observations.len(),
        dropped_missing: ds.dropped_missing,
        dropped_weight: ds.dropped_weight,
        chains: config.chains,
        accept_rate: all.accept_rate,
        divergences: all.divergence_count,
        summary,
        rhat,
        curve,
    })
}

/// Executes one command and returns the files it wrote.
pub fn run_command(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let threads = config.threads.unwrap_or_else(worker_count);

    if config.command == Command::EmitPlotData {
        let run_dir = config.run_dir.as_ref().expect("validated");
        let record = read_run_record(run_dir)?;
        return write_report(&record.result, &config.output_dir);
    }

    let start = Instant::now();
    let result = match config.command {
        Command::SimulateStudy => {
            let mut scenario = config.scenario.clone().expect("validated");
            scenario.chain = config.chain.clone();
            match scenario.kind {
                ScenarioKind::SlrSkewed | ScenarioKind::SlrSymmetric => {
                    RunResult::Study(run_study_with_threads(&scenario, threads)?)
                }
                ScenarioKind::Nonlinear => RunResult::Curve(run_curve_study_with_threads(&scenario, threads)?),
                ScenarioKind::WeightsOnly => {
                    return Err(Error::Config("use `weights-dist` for the weights-only experiment".into()))
                }
            }
        }
        Command::WeightsDist => {
            let mut cfg = config.weights_dist.clone().expect("validated");
            cfg.chain = config.chain.clone();
            RunResult::WeightDist(run_weight_dist_with(&cfg)?)
        }
        Command::Fit => RunResult::Fit(run_fit(config, threads)?),
        Command::EmitPlotData => unreachable!(),
    };
    let wall = start.elapsed().as_secs_f64();

    let mut files = write_report(&result, &config.output_dir)?;
    let record = RunRecord {
        version: version_string(),
        config: config.clone(),
        wall_time_secs: wall,
        result,
    };
    files.push(write_run_record(&record, &config.output_dir)?);
    Ok(files)
}
