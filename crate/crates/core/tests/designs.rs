use isamp::designs::{
    gen_lognormal_sizes, gen_nonlinear_population, gen_slr_population, inclusion_probabilities, pps_sample,
    srs_sample, ScenarioConfig, ScenarioKind,
};
use isamp::rng::derive_seed;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

fn gamma_sizes(n: usize, seed: u64) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let g = Gamma::new(2.0, 1.0).unwrap();
    (0..n).map(|_| g.sample(&mut r)).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// `|observed - expected| <= 4` standard errors of the mean.
fn within_4se(xs: &[f64], expected: f64, var: f64) -> bool {
    let (m, _) = mean_var(xs);
    (m - expected).abs() <= 4.0 * (var / xs.len() as f64).sqrt()
}

#[test]
fn pps_inclusion_frequencies_are_calibrated() {
    let (big_n, n, reps) = (1000, 100, 10_000);
    let sizes = gamma_sizes(big_n, 1);
    let total: f64 = sizes.iter().sum();
    let mut counts = vec![0usize; big_n];
    for rep in 0..reps {
        for &i in &pps_sample(&sizes, n, derive_seed(7, rep)).unwrap().indices {
            counts[i] += 1;
        }
    }
    let ok = (0..big_n)
        .filter(|&i| {
            let p = (n as f64 * sizes[i] / total).min(1.0);
            let f = counts[i] as f64 / reps as f64;
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            (f - p).abs() <= 3.0 * se.max(1e-12)
        })
        .count();
    assert!(ok as f64 >= 0.99 * big_n as f64, "{ok} of {big_n} units calibrated");
}

#[test]
fn srs_inclusion_frequencies_are_uniform() {
    let (big_n, n, reps) = (200, 20, 5000);
    let mut counts = vec![0usize; big_n];
    for rep in 0..reps {
        for &i in &srs_sample(big_n, n, derive_seed(8, rep)).unwrap().indices {
            counts[i] += 1;
        }
    }
    let p = n as f64 / big_n as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    let ok = counts
        .iter()
        .filter(|&&c| (c as f64 / reps as f64 - p).abs() <= 3.0 * se)
        .count();
    assert!(ok as f64 >= 0.99 * big_n as f64);
}

#[test]
fn samples_are_deterministic_in_the_seed() {
    let sizes = gamma_sizes(500, 2);
    assert_eq!(pps_sample(&sizes, 50, 3).unwrap(), pps_sample(&sizes, 50, 3).unwrap());
    assert_ne!(pps_sample(&sizes, 50, 3).unwrap(), pps_sample(&sizes, 50, 4).unwrap());
    assert_eq!(srs_sample(500, 50, 3).unwrap(), srs_sample(500, 50, 3).unwrap());
    assert_eq!(gen_slr_population(100, 2.0, false, 5).unwrap(), gen_slr_population(100, 2.0, false, 5).unwrap());
}

#[test]
fn capped_probabilities_sum_to_n() {
    let mut sizes = gamma_sizes(300, 3);
    sizes[0] = 500.0;
    sizes[1] = 200.0;
    let p = inclusion_probabilities(&sizes, 60).unwrap();
    assert_eq!(p[0], 1.0);
    assert_eq!(p[1], 1.0);
    assert!((p.iter().sum::<f64>() - 60.0).abs() < 1e-9);
    assert!(p.iter().all(|v| *v > 0.0 && *v <= 1.0));
    let s = pps_sample(&sizes, 60, 1).unwrap();
    assert!(s.indices.contains(&0) && s.indices.contains(&1));
}

#[test]
fn skewed_population_moments() {
    let b_pi = 2.0;
    let pop = gen_slr_population(20_000, b_pi, false, 11).unwrap();
    assert_eq!(pop.len(), 20_000);
    // x ~ U(0, 1), pi ~ gamma(2, rate b), y = x + pi + e with sd(e) = 0.1
    assert!(within_4se(&pop.x, 0.5, 1.0 / 12.0));
    assert!(within_4se(&pop.pi_raw, 2.0 / b_pi, 2.0 / (b_pi * b_pi)));
    let var_y = 1.0 / 12.0 + 2.0 / (b_pi * b_pi) + 0.01;
    assert!(within_4se(&pop.y, 0.5 + 2.0 / b_pi, var_y));
    let resid: Vec<f64> = (0..pop.len()).map(|i| pop.y[i] - pop.x[i] - pop.pi_raw[i]).collect();
    assert!(within_4se(&resid, 0.0, 0.01));
    let (_, v) = mean_var(&resid);
    assert!((v - 0.01).abs() < 0.001);
}

#[test]
fn symmetric_population_moments() {
    let pop = gen_slr_population(20_000, 2.0, true, 12).unwrap();
    assert!(pop.pi_raw.iter().all(|p| *p > 0.0));
    assert!(within_4se(&pop.pi_raw, 1.0, 0.01));
    let (_, v) = mean_var(&pop.pi_raw);
    assert!((v.sqrt() - 0.1).abs() < 0.003);
}

#[test]
fn nonlinear_population_moments() {
    let pop = gen_nonlinear_population(20_000, 13).unwrap();
    assert!(pop.x.iter().all(|x| (0.0..2.0).contains(x)));
    assert!(within_4se(&pop.x, 1.0, 1.0 / 3.0));
    let resid: Vec<f64> = (0..pop.len())
        .map(|i| pop.y[i] - (pop.x[i] + pop.pi_raw[i] - 0.5 * pop.x[i] * pop.x[i]))
        .collect();
    assert!(within_4se(&resid, 0.0, 0.01));
    assert!(within_4se(&pop.pi_raw, 2.0, 2.0));
}

#[test]
fn lognormal_sizes_moments() {
    let pop = gen_lognormal_sizes(50_000, 0.0, 1.0, 14).unwrap();
    let logs: Vec<f64> = pop.pi_raw.iter().map(|p| p.ln()).collect();
    assert!(within_4se(&logs, 0.0, 1.0));
    let (_, v) = mean_var(&logs);
    assert!((v - 1.0).abs() < 4.0 * (2.0 / 50_000f64).sqrt());
}

#[test]
fn distinct_seeds_give_uncorrelated_streams() {
    let a = gen_lognormal_sizes(20_000, 0.0, 1.0, derive_seed(1, 1)).unwrap();
    let b = gen_lognormal_sizes(20_000, 0.0, 1.0, derive_seed(1, 2)).unwrap();
    let la: Vec<f64> = a.pi_raw.iter().map(|p| p.ln()).collect();
    let lb: Vec<f64> = b.pi_raw.iter().map(|p| p.ln()).collect();
    let (ma, va) = mean_var(&la);
    let (mb, vb) = mean_var(&lb);
    let cov = la.iter().zip(&lb).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (la.len() - 1) as f64;
    let r = cov / (va * vb).sqrt();
    assert!(r.abs() < 4.0 / (la.len() as f64).sqrt(), "correlation {r}");
}

#[test]
fn scenario_validation() {
    let mut s = ScenarioConfig::desk(ScenarioKind::SlrSkewed);
    assert_eq!((s.big_n, s.n, s.reps), (20_000, 500, 200));
    assert!(s.validate().is_ok());
    s.n = s.big_n;
    assert!(s.validate().is_err());
    s.n = 0;
    assert!(s.validate().is_err());
    let c = ScenarioConfig::desk(ScenarioKind::Nonlinear);
    assert_eq!((c.big_n, c.n, c.reps), (20_000, 100, 100));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pps_returns_n_distinct_sorted_units(seed in 0u64..1000, n in 1usize..80) {
        let sizes = gamma_sizes(200, seed);
        let s = pps_sample(&sizes, n, seed).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.indices.iter().all(|&i| i < 200));
    }

    #[test]
    fn inclusion_probabilities_are_capped_and_sum_to_n(seed in 0u64..1000, n in 1usize..150) {
        let mut sizes = gamma_sizes(150, seed);
        sizes[seed as usize % 150] *= 100.0;
        let p = inclusion_probabilities(&sizes, n).unwrap();
        prop_assert!((p.iter().sum::<f64>() - n as f64).abs() < 1e-8);
        prop_assert!(p.iter().all(|v| *v > 0.0 && *v <= 1.0));
    }
}
