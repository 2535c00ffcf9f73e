use isamp::designs::{gen_lognormal_sizes, gen_nonlinear_population, ScenarioConfig, ScenarioKind};
use isamp::harness::{
    curve_grid, curve_truth, run_curve_replicate, run_curve_study_with_threads, run_replicate, run_study_with_threads,
    run_weight_dist_with, StudyMethod, WeightDistConfig,
};
use isamp::rng::derive_seed;
use isamp::sampler::ChainConfig;

fn chain(warmup: usize, draws: usize) -> ChainConfig {
    ChainConfig {
        n_warmup: warmup,
        n_draws: draws,
        ..ChainConfig::default()
    }
}

fn small(kind: ScenarioKind, reps: usize) -> ScenarioConfig {
    ScenarioConfig {
        big_n: 3000,
        n: 80,
        reps,
        chain: chain(300, 400),
        ..ScenarioConfig::desk(kind)
    }
}

#[test]
fn table_is_independent_of_worker_count() {
    let s = small(ScenarioKind::SlrSkewed, 6);
    let one = run_study_with_threads(&s, 1).unwrap();
    let three = run_study_with_threads(&s, 3).unwrap();
    assert_eq!(one, three);
    let again = run_study_with_threads(&s, 2).unwrap();
    assert_eq!(one, again);
}

#[test]
fn replicates_are_in_order_and_well_formed() {
    let s = small(ScenarioKind::SlrSymmetric, 4);
    let t = run_study_with_threads(&s, 2).unwrap();
    assert_eq!(t.failed, 0);
    assert_eq!(t.results.len(), 12);
    for (k, r) in t.results.iter().enumerate() {
        assert_eq!(r.replicate, k / 3);
        assert!(r.ci_low <= r.ci_high);
        assert!((r.ci_length - (r.ci_high - r.ci_low)).abs() < 1e-15);
        assert_eq!(r.covered, r.ci_low <= 1.0 && 1.0 <= r.ci_high);
    }
    for m in &t.methods {
        assert!((0.0..=1.0).contains(&m.coverage_95));
        let m_reps = t.reps as f64;
        assert!(m.mse >= m.bias * m.bias * (1.0 - 1.0 / m_reps) - 1e-12);
    }
    assert_eq!(run_replicate(&s, 2).unwrap(), t.results[6..9].to_vec());
}

#[test]
fn single_replicate_identities() {
    let s = small(ScenarioKind::SlrSkewed, 1);
    let t = run_study_with_threads(&s, 1).unwrap();
    for m in &t.methods {
        let r = t.results.iter().find(|r| r.method == m.method).unwrap();
        assert_eq!(m.bias, r.point_estimate - 1.0);
        assert!((m.mse - m.bias * m.bias).abs() <= 1e-15);
        assert!(m.coverage_95 == 0.0 || m.coverage_95 == 1.0);
        assert_eq!(m.avg_ci_length, r.ci_length);
    }
}

#[test]
fn non_informative_design_gives_nominal_coverage() {
    let reps = 60;
    let s = ScenarioConfig {
        beta_pi: 0.0,
        n: 100,
        ..small(ScenarioKind::SlrSkewed, reps)
    };
    let t = run_study_with_threads(&s, 1).unwrap();
    let se = (0.95 * 0.05 / reps as f64).sqrt();
    for m in &t.methods {
        assert!(
            (m.coverage_95 - 0.95).abs() <= 3.0 * se + 1e-12,
            "{}: coverage {}",
            m.method,
            m.coverage_95
        );
        assert!(m.bias.abs() < 0.05, "{}: bias {}", m.method, m.bias);
    }
}

#[test]
fn curve_replicate_shapes() {
    let s = ScenarioConfig {
        big_n: 3000,
        n: 80,
        reps: 2,
        chain: chain(200, 300),
        ..ScenarioConfig::desk(ScenarioKind::Nonlinear)
    };
    let pop = gen_nonlinear_population(s.big_n, derive_seed(s.base_seed, 1)).unwrap();
    let reps = run_curve_replicate(&pop, &s, 0).unwrap();
    assert_eq!(reps.len(), 3);
    for r in &reps {
        assert_eq!(r.fitted.len(), 81);
        for g in 0..81 {
            assert!(r.lo[g] <= r.fitted[g] && r.fitted[g] <= r.hi[g]);
        }
    }
    let m = run_curve_study_with_threads(&s, 1).unwrap();
    assert_eq!(m.grid, curve_grid());
    assert_eq!(m.truth, m.grid.iter().map(|&x| curve_truth(x)).collect::<Vec<_>>());
    for method in StudyMethod::ALL {
        let c = m.method(method).unwrap();
        assert!(c.coverage.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

fn weight_cfg(scale: f64) -> WeightDistConfig {
    WeightDistConfig {
        scale,
        chain: chain(500, 1000),
        ..WeightDistConfig::new(20_000, 100, 3)
    }
}

#[test]
fn scaling_sizes_shifts_kappa_by_log_c() {
    let base = run_weight_dist_with(&weight_cfg(1.0)).unwrap();
    let scaled = run_weight_dist_with(&weight_cfg(4.0)).unwrap();
    // Same sample, logs shifted by log 4.
    for (a, b) in base.sampled_log_pi.iter().zip(&scaled.sampled_log_pi) {
        assert!((b - a - 4f64.ln()).abs() < 1e-12);
    }
    let shift = scaled.kappa_mean() - base.kappa_mean();
    assert!((shift - 4f64.ln()).abs() < 0.15, "shift {shift}");
    assert!((scaled.sigma_pi2_mean() - base.sigma_pi2_mean()).abs() < 0.1);
}

#[test]
fn census_fit_approaches_the_direct_mle() {
    let big_n = 2000;
    let cfg = WeightDistConfig {
        chain: chain(500, 1000),
        ..WeightDistConfig::new(big_n, big_n, 4)
    };
    let res = run_weight_dist_with(&cfg).unwrap();
    let pop = gen_lognormal_sizes(big_n, 0.0, 1.0, derive_seed(4, 1)).unwrap();
    let logs: Vec<f64> = pop.pi_raw.iter().map(|p| p.ln()).collect();
    let n = logs.len() as f64;
    let m = logs.iter().sum::<f64>() / n;
    // Size-biased lognormal MLE: log pi ~ normal(kappa + s2, s2).
    let s2 = logs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let kappa = m - s2;
    let k = res.summary.get("kappa").unwrap();
    let v = res.summary.get("sigma_pi2").unwrap();
    assert!((k.mean - kappa).abs() < 3.0 * k.sd, "kappa {} vs {kappa}", k.mean);
    assert!((v.mean - s2).abs() < 3.0 * v.sd, "s2 {} vs {s2}", v.mean);
    assert!(res.interval_99[0][0] < k.q025 && k.q975 < res.interval_99[0][1]);
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut s = small(ScenarioKind::SlrSkewed, 2);
    s.n = s.big_n + 1;
    assert!(run_study_with_threads(&s, 1).is_err());
    let c = small(ScenarioKind::Nonlinear, 2);
    assert!(run_study_with_threads(&c, 1).is_err());
    let w = WeightDistConfig::new(100, 200, 1);
    assert!(run_weight_dist_with(&w).is_err());
}
