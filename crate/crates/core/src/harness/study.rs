use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_pool, fit_model, mean, worker_count, StudyMethod};
use crate::designs::{
    gen_slr_population_with, pps_sample, srs_sample, Population, ScenarioConfig, ScenarioKind, SampleIndex, SlrTruth,
};
use crate::error::{Error, Result};
use crate::model::{Method, ModelKind, ModelSpec, Observation};
use crate::rng::derive_seed;
use crate::sampler::quantile_sorted;

/// Slope of `x` in the linear scenarios; the scored target.
pub const SLOPE_TRUTH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub method: StudyMethod,
    pub point_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub covered: bool,
    pub ci_length: f64,
    pub divergences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: StudyMethod,
    pub bias: f64,
    pub mse: f64,
    pub coverage_95: f64,
    pub avg_ci_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub kind: ScenarioKind,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    #[serde(rename = "M")]
    pub reps: usize,
    pub failed: usize,
    pub truth: f64,
    pub methods: Vec<MethodMetrics>,
    /// Per-replicate results of the successful replicates, in replicate order.
    pub results: Vec<ReplicateResult>,
}

impl MetricsTable {
    pub fn method(&self, m: StudyMethod) -> Option<&MethodMetrics> {
        self.methods.iter().find(|x| x.method == m)
    }
}

pub(crate) fn replicate_seed(base: u64, replicate: usize) -> u64 {
    base.wrapping_add(replicate as u64)
}

fn slr_observations(pop: &Population, sample: &SampleIndex) -> Result<Vec<Observation>> {
    sample
        .indices
        .iter()
        .map(|&i| Observation::new(pop.y[i], pop.pi_raw[i], vec![1.0, pop.x[i]], vec![1.0]))
        .collect()
}

fn fit_slope(
    data: &[Observation],
    method: Method,
    scenario: &ScenarioConfig,
    seed: u64,
    replicate: usize,
    label: StudyMethod,
) -> Result<ReplicateResult> {
    let (post, draws) = fit_model(data, ModelSpec::new(ModelKind::Linear, method), &scenario.chain, seed)?;
    let j = post.layout().beta.start + 1;
    let mut slope = draws.column(j);
    let point = mean(&slope);
    slope.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&slope, 0.025);
    let hi = quantile_sorted(&slope, 0.975);
    Ok(ReplicateResult {
        replicate,
        method: label,
        point_estimate: point,
        ci_low: lo,
        ci_high: hi,
        covered: lo <= SLOPE_TRUTH && SLOPE_TRUTH <= hi,
        ci_length: hi - lo,
        divergences: draws.divergence_count,
    })
}

/// One replicate of a linear scenario: a fresh population, one informative
/// and one simple random sample, and the three fits of the slope.
pub fn run_replicate(scenario: &ScenarioConfig, replicate: usize) -> Result<Vec<ReplicateResult>> {
    if !scenario.kind.is_slr() {
        return Err(Error::Config(format!(
            "run_replicate scores the slope of a linear scenario; `{}` is not one",
            scenario.kind
        )));
    }
    let seed = replicate_seed(scenario.base_seed, replicate);
    let truth = SlrTruth {
        beta_pi: scenario.beta_pi,
        ..SlrTruth::default()
    };
    let symmetric = scenario.kind == ScenarioKind::SlrSymmetric;
    let pop = gen_slr_population_with(scenario.big_n, scenario.b_pi, symmetric, truth, derive_seed(seed, 1))?;
    let is = slr_observations(&pop, &pps_sample(&pop.pi_raw, scenario.n, derive_seed(seed, 2))?)?;
    let srs = slr_observations(&pop, &srs_sample(scenario.big_n, scenario.n, derive_seed(seed, 3))?)?;

    Ok(vec![
        fit_slope(&is, Method::Full, scenario, derive_seed(seed, 10), replicate, StudyMethod::Full)?,
        fit_slope(&is, Method::Pseudo, scenario, derive_seed(seed, 11), replicate, StudyMethod::Pseudo)?,
        fit_slope(&srs, Method::Ignore, scenario, derive_seed(seed, 12), replicate, StudyMethod::Srs)?,
    ])
}

/// Runs all replicates on `ISAMP_THREADS` workers.
pub fn run_study(scenario: &ScenarioConfig) -> Result<MetricsTable> {
    run_study_with_threads(scenario, worker_count())
}

pub fn run_study_with_threads(scenario: &ScenarioConfig, threads: usize) -> Result<MetricsTable> {
    scenario.validate()?;
    let pool = build_pool(threads)?;
    let outcomes: Vec<Result<Vec<ReplicateResult>>> =
        pool.install(|| (0..scenario.reps).into_par_iter().map(|r| run_replicate(scenario, r)).collect());

    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    check_failures(failed, scenario.reps, &outcomes)?;
    let results: Vec<ReplicateResult> = outcomes.into_iter().filter_map(Result::ok).flatten().collect();
    Ok(MetricsTable {
        kind: scenario.kind,
        big_n: scenario.big_n,
        n: scenario.n,
        reps: scenario.reps,
        failed,
        truth: SLOPE_TRUTH,
        methods: StudyMethod::ALL
            .iter()
            .map(|m| aggregate(*m, &results, SLOPE_TRUTH))
            .collect(),
        results,
    })
}

pub(crate) fn check_failures<T>(failed: usize, total: usize, outcomes: &[Result<T>]) -> Result<()> {
    if failed as f64 > 0.05 * total as f64 {
        if let Some(Err(e)) = outcomes.iter().find(|o| o.is_err()) {
            eprintln!("first replicate failure: {e}");
        }
        return Err(Error::Study { failed, total });
    }
    Ok(())
}

fn aggregate(method: StudyMethod, results: &[ReplicateResult], truth: f64) -> MethodMetrics {
    let rows: Vec<&ReplicateResult> = results.iter().filter(|r| r.method == method).collect();
    let est: Vec<f64> = rows.iter().map(|r| r.point_estimate - truth).collect();
    let sq: Vec<f64> = est.iter().map(|e| e * e).collect();
    let cov: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.covered))).collect();
    let len: Vec<f64> = rows.iter().map(|r| r.ci_length).collect();
    MethodMetrics {
        method,
        bias: mean(&est),
        mse: mean(&sq),
        coverage_95: mean(&cov),
        avg_ci_length: mean(&len),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(m: StudyMethod, est: f64, covered: bool) -> ReplicateResult {
        ReplicateResult {
            replicate: 0,
            method: m,
            point_estimate: est,
            ci_low: est - 0.5,
            ci_high: est + 0.5,
            covered,
            ci_length: 1.0,
            divergences: 0,
        }
    }

    #[test]
    fn single_replicate_identities() {
        let m = aggregate(StudyMethod::Full, &[result(StudyMethod::Full, 1.3, true)], 1.0);
        assert!((m.mse - m.bias * m.bias).abs() < 1e-15);
        assert_eq!(m.coverage_95, 1.0);
    }

    #[test]
    fn mse_dominates_squared_bias() {
        let rs: Vec<_> = [0.8, 1.1, 1.4, 0.95]
            .iter()
            .map(|e| result(StudyMethod::Pseudo, *e, false))
            .collect();
        let m = aggregate(StudyMethod::Pseudo, &rs, 1.0);
        assert!(m.mse >= m.bias * m.bias);
        assert_eq!(m.coverage_95, 0.0);
    }

    #[test]
    fn failure_threshold() {
        let ok: Vec<Result<()>> = (0..20).map(|_| Ok(())).collect();
        assert!(check_failures(1, 20, &ok).is_ok());
        assert!(matches!(check_failures(2, 20, &ok), Err(Error::Study { failed: 2, total: 20 })));
    }

    #[test]
    fn rejects_curve_scenario() {
        let s = ScenarioConfig::desk(ScenarioKind::Nonlinear);
        assert!(run_replicate(&s, 0).is_err());
    }
}
