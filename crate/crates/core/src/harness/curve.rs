use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::study::{check_failures, replicate_seed};
use super::{build_pool, fit_model, mean, worker_count, StudyMethod};
use crate::designs::{gen_nonlinear_population, pps_sample, srs_sample, Population, ScenarioConfig, ScenarioKind, SampleIndex};
use crate::error::{Error, Result};
use crate::model::{Method, ModelSpec, Observation};
use crate::rng::derive_seed;
use crate::sampler::quantile_sorted;
use crate::splines::SplineBasis;

pub const CURVE_BASES: usize = 8;
pub const CURVE_DEGREE: usize = 3;
pub const CURVE_PENALTY_ORDER: usize = 4;
const GRID_POINTS: usize = 81;

/// `x = 0, 1/40, ..., 2`.
pub fn curve_grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|i| i as f64 / 40.0).collect()
}

/// Population mean curve `x + 2 - 0.5 x^2` (the size variable has mean 2).
pub fn curve_truth(x: f64) -> f64 {
    x + 2.0 - 0.5 * x * x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReplicate {
    pub replicate: usize,
    pub method: StudyMethod,
    pub fitted: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCurve {
    pub method: StudyMethod,
    pub mean_fit: Vec<f64>,
    pub bias: Vec<f64>,
    pub mse: Vec<f64>,
    pub coverage: Vec<f64>,
    pub avg_ci_length: Vec<f64>,
}

impl MethodCurve {
    pub fn grid_average_coverage(&self) -> f64 {
        mean(&self.coverage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetrics {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    #[serde(rename = "M")]
    pub reps: usize,
    pub failed: usize,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub methods: Vec<MethodCurve>,
}

impl CurveMetrics {
    pub fn method(&self, m: StudyMethod) -> Option<&MethodCurve> {
        self.methods.iter().find(|x| x.method == m)
    }
}

fn fit_curve(
    pop: &Population,
    sample: &SampleIndex,
    method: Method,
    scenario: &ScenarioConfig,
    seed: u64,
    replicate: usize,
    label: StudyMethod,
) -> Result<CurveReplicate> {
    let xs: Vec<f64> = sample.indices.iter().map(|&i| pop.x[i]).collect();
    let basis = SplineBasis::new(&xs, CURVE_BASES, CURVE_DEGREE, CURVE_PENALTY_ORDER)?;
    let data: Vec<Observation> = sample
        .indices
        .iter()
        .map(|&i| Observation::new(pop.y[i], pop.pi_raw[i], basis.eval_row(pop.x[i]), vec![1.0]))
        .collect::<Result<_>>()?;
    let spec = ModelSpec::spline(method, CURVE_BASES, CURVE_PENALTY_ORDER);
    let (post, draws) = fit_model(&data, spec, &scenario.chain, seed)?;
    let beta = post.layout().beta.clone();

    // Grid points outside the sample range take the boundary value.
    let rows: Vec<Vec<f64>> = curve_grid().iter().map(|&g| basis.eval_row(g)).collect();
    let mut fitted = Vec::with_capacity(rows.len());
    let mut lo = Vec::with_capacity(rows.len());
    let mut hi = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut vals: Vec<f64> = draws
            .rows()
            .map(|d| row.iter().zip(&d[beta.clone()]).map(|(a, b)| a * b).sum())
            .collect();
        fitted.push(mean(&vals));
        vals.sort_by(f64::total_cmp);
        lo.push(quantile_sorted(&vals, 0.025));
        hi.push(quantile_sorted(&vals, 0.975));
    }
    Ok(CurveReplicate {
        replicate,
        method: label,
        fitted,
        lo,
        hi,
    })
}

/// One replicate of the nonlinear scenario on a fixed population.
pub fn run_curve_replicate(pop: &Population, scenario: &ScenarioConfig, replicate: usize) -> Result<Vec<CurveReplicate>> {
    let seed = replicate_seed(scenario.base_seed, replicate);
    let is = pps_sample(&pop.pi_raw, scenario.n, derive_seed(seed, 2))?;
    let srs = srs_sample(pop.len(), scenario.n, derive_seed(seed, 3))?;
    Ok(vec![
        fit_curve(pop, &is, Method::Full, scenario, derive_seed(seed, 10), replicate, StudyMethod::Full)?,
        fit_curve(pop, &is, Method::Pseudo, scenario, derive_seed(seed, 11), replicate, StudyMethod::Pseudo)?,
        fit_curve(pop, &srs, Method::Ignore, scenario, derive_seed(seed, 12), replicate, StudyMethod::Srs)?,
    ])
}

/// Pointwise bias, MSE, coverage and interval length of the fitted mean
/// curve over the replicates; the population is generated once.
pub fn run_curve_study(scenario: &ScenarioConfig) -> Result<CurveMetrics> {
    run_curve_study_with_threads(scenario, worker_count())
}

pub fn run_curve_study_with_threads(scenario: &ScenarioConfig, threads: usize) -> Result<CurveMetrics> {
    if scenario.kind != ScenarioKind::Nonlinear {
        return Err(Error::Config(format!("curve study needs the nonlinear scenario, got `{}`", scenario.kind)));
    }
    scenario.validate()?;
    let pop = gen_nonlinear_population(scenario.big_n, derive_seed(scenario.base_seed, 1))?;
    let pool = build_pool(threads)?;
    let outcomes: Vec<Result<Vec<CurveReplicate>>> = pool.install(|| {
        (0..scenario.reps)
            .into_par_iter()
            .map(|r| run_curve_replicate(&pop, scenario, r))
            .collect()
    });
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    check_failures(failed, scenario.reps, &outcomes)?;
    let reps: Vec<CurveReplicate> = outcomes.into_iter().filter_map(Result::ok).flatten().collect();

    let grid = curve_grid();
    let truth: Vec<f64> = grid.iter().map(|&x| curve_truth(x)).collect();
    let methods = StudyMethod::ALL
        .iter()
        .map(|&m| {
            let rows: Vec<&CurveReplicate> = reps.iter().filter(|r| r.method == m).collect();
            let mut mc = MethodCurve {
                method: m,
                mean_fit: Vec::new(),
                bias: Vec::new(),
                mse: Vec::new(),
                coverage: Vec::new(),
                avg_ci_length: Vec::new(),
            };
            for (g, t) in truth.iter().enumerate() {
                let fit: Vec<f64> = rows.iter().map(|r| r.fitted[g]).collect();
                let err: Vec<f64> = fit.iter().map(|f| f - t).collect();
                let sq: Vec<f64> = err.iter().map(|e| e * e).collect();
                let cov: Vec<f64> = rows
                    .iter()
                    .map(|r| f64::from(u8::from(r.lo[g] <= *t && *t <= r.hi[g])))
                    .collect();
                let len: Vec<f64> = rows.iter().map(|r| r.hi[g] - r.lo[g]).collect();
                mc.mean_fit.push(mean(&fit));
                mc.bias.push(mean(&err));
                mc.mse.push(mean(&sq));
                mc.coverage.push(mean(&cov));
                mc.avg_ci_length.push(mean(&len));
            }
            mc
        })
        .collect();
    Ok(CurveMetrics {
        big_n: scenario.big_n,
        n: scenario.n,
        reps: scenario.reps,
        failed,
        grid,
        truth,
        methods,
    })
}
