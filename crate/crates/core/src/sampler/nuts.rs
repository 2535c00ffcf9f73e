use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adapt::{DualAveraging, Welford, Windows};
use super::{ChainConfig, Draws, FnTarget, LogDensity};
use crate::error::{Error, Result};

const MAX_ENERGY_ERROR: f64 = 1000.0;
const INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

struct Hamiltonian<'a, T: ?Sized> {
    target: &'a T,
    inv_mass: Vec<f64>,
}

impl<T: LogDensity + ?Sized> Hamiltonian<'_, T> {
    fn energy(&self, z: &Point) -> f64 {
        let k: f64 = z.p.iter().zip(&self.inv_mass).map(|(p, m)| p * p * m).sum();
        let h = 0.5 * k - z.logp;
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn velocity(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_mass).map(|(p, m)| p * m).collect()
    }

    fn refresh(&self, z: &mut Point) {
        z.logp = self.target.log_density_and_grad(&z.q, &mut z.grad);
        if !z.logp.is_finite() || z.grad.iter().any(|g| !g.is_finite()) {
            z.logp = f64::NEG_INFINITY;
        }
    }

    fn leapfrog(&self, z: &mut Point, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_mass) {
            *q += eps * m * p;
        }
        self.refresh(z);
        if z.logp == f64::NEG_INFINITY {
            return;
        }
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
    }

    fn sample_momentum(&self, z: &mut Point, rng: &mut ChaCha8Rng) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_mass) {
            let n: f64 = rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

struct Transition<'a, 'b, T: ?Sized> {
    ham: &'a Hamiltonian<'b, T>,
    eps: f64,
    h0: f64,
    n_leapfrog: usize,
    sum_metro: f64,
    divergent: bool,
}

impl<T: LogDensity + ?Sized> Transition<'_, '_, T> {
    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        z: &mut Point,
        depth: usize,
        z_propose: &mut Point,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut Vec<f64>,
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        sign: f64,
        log_sum_weight: &mut f64,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        if depth == 0 {
            self.ham.leapfrog(z, sign * self.eps);
            self.n_leapfrog += 1;
            let h = self.ham.energy(z);
            if h - self.h0 > MAX_ENERGY_ERROR {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, self.h0 - h);
            self.sum_metro += if self.h0 - h > 0.0 { 1.0 } else { (self.h0 - h).exp() };
            z_propose.clone_from(z);
            let v = self.ham.velocity(&z.p);
            p_sharp_beg.clone_from(&v);
            *p_sharp_end = v;
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            p_beg.clone_from(&z.p);
            p_end.clone_from(&z.p);
            return !self.divergent;
        }

        let dim = z.q.len();
        // Initial subtree.
        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut p_sharp_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        let valid_init = self.build_tree(
            z,
            depth - 1,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            sign,
            &mut lsw_init,
            rng,
        );
        if !valid_init {
            return false;
        }

        // Final subtree.
        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        let valid_final = self.build_tree(
            z,
            depth - 1,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            sign,
            &mut lsw_final,
            rng,
        );
        if !valid_final {
            return false;
        }

        // Multinomial sample from the merged subtree.
        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = (lsw_final - lsw_subtree).exp();
            if rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }

        let rho_subtree = add(&rho_init, &rho_final);
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }

        let mut persist = no_u_turn(p_sharp_beg, p_sharp_end, &rho_subtree);
        let rho_extended = add(&rho_init, &p_final_beg);
        persist &= no_u_turn(p_sharp_beg, &p_sharp_final_beg, &rho_extended);
        let rho_extended = add(&rho_final, &p_init_end);
        persist &= no_u_turn(&p_sharp_init_end, p_sharp_end, &rho_extended);
        persist
    }
}

struct Outcome {
    accept_stat: f64,
    divergent: bool,
    n_leapfrog: usize,
}

fn transition<T: LogDensity + ?Sized>(
    ham: &Hamiltonian<'_, T>,
    current: &mut Point,
    eps: f64,
    max_depth: usize,
    rng: &mut ChaCha8Rng,
) -> Outcome {
    ham.sample_momentum(current, rng);
    let h0 = ham.energy(current);
    let mut z_fwd = current.clone();
    let mut z_bck = current.clone();
    let mut z_sample = current.clone();
    let mut z_propose = current.clone();

    let p0 = current.p.clone();
    let v0 = ham.velocity(&p0);
    let (mut p_fwd_fwd, mut p_fwd_bck, mut p_bck_fwd, mut p_bck_bck) =
        (p0.clone(), p0.clone(), p0.clone(), p0.clone());
    let (mut ps_fwd_fwd, mut ps_fwd_bck, mut ps_bck_fwd, mut ps_bck_bck) =
        (v0.clone(), v0.clone(), v0.clone(), v0);
    let mut rho = p0;
    let mut log_sum_weight = 0.0;

    let mut tr = Transition {
        ham,
        eps,
        h0,
        n_leapfrog: 0,
        sum_metro: 0.0,
        divergent: false,
    };
    let dim = current.q.len();

    let mut depth = 0;
    while depth < max_depth {
        let mut rho_fwd = vec![0.0; dim];
        let mut rho_bck = vec![0.0; dim];
        let mut lsw_subtree = f64::NEG_INFINITY;
        let valid = if rng.random::<f64>() > 0.5 {
            rho_bck.clone_from(&rho);
            p_bck_fwd.clone_from(&p_fwd_bck);
            ps_bck_fwd.clone_from(&ps_fwd_bck);
            tr.build_tree(
                &mut z_fwd,
                depth,
                &mut z_propose,
                &mut ps_fwd_bck,
                &mut ps_fwd_fwd,
                &mut rho_fwd,
                &mut p_fwd_bck,
                &mut p_fwd_fwd,
                1.0,
                &mut lsw_subtree,
                rng,
            )
        } else {
            rho_fwd.clone_from(&rho);
            p_fwd_bck.clone_from(&p_bck_fwd);
            ps_fwd_bck.clone_from(&ps_bck_fwd);
            tr.build_tree(
                &mut z_bck,
                depth,
                &mut z_propose,
                &mut ps_bck_fwd,
                &mut ps_bck_bck,
                &mut rho_bck,
                &mut p_bck_fwd,
                &mut p_bck_bck,
                -1.0,
                &mut lsw_subtree,
                rng,
            )
        };
        if !valid {
            break;
        }
        depth += 1;

        if lsw_subtree > log_sum_weight {
            z_sample.clone_from(&z_propose);
        } else {
            let accept = (lsw_subtree - log_sum_weight).exp();
            if rng.random::<f64>() < accept {
                z_sample.clone_from(&z_propose);
            }
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

        rho = add(&rho_bck, &rho_fwd);
        let mut persist = no_u_turn(&ps_bck_bck, &ps_fwd_fwd, &rho);
        let rho_extended = add(&rho_bck, &p_fwd_bck);
        persist &= no_u_turn(&ps_bck_bck, &ps_fwd_bck, &rho_extended);
        let rho_extended = add(&rho_fwd, &p_bck_fwd);
        persist &= no_u_turn(&ps_bck_fwd, &ps_fwd_fwd, &rho_extended);
        if !persist {
            break;
        }
    }

    *current = z_sample;
    Outcome {
        accept_stat: if tr.n_leapfrog > 0 {
            tr.sum_metro / tr.n_leapfrog as f64
        } else {
            0.0
        },
        divergent: tr.divergent,
        n_leapfrog: tr.n_leapfrog,
    }
}

/// Heuristic initial step size: double or halve until a single leapfrog step
/// crosses an acceptance probability of 0.8.
fn find_step_size<T: LogDensity + ?Sized>(
    ham: &Hamiltonian<'_, T>,
    start: &Point,
    mut eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let threshold = 0.8f64.ln();
    let mut z = start.clone();
    ham.sample_momentum(&mut z, rng);
    let h0 = ham.energy(&z);
    ham.leapfrog(&mut z, eps);
    let delta = h0 - ham.energy(&z);
    let up = delta > threshold;
    loop {
        let mut z = start.clone();
        ham.sample_momentum(&mut z, rng);
        let h0 = ham.energy(&z);
        ham.leapfrog(&mut z, eps);
        let delta = h0 - ham.energy(&z);
        if (up && !(delta > threshold)) || (!up && !(delta < threshold)) {
            return Ok(eps);
        }
        eps = if up { 2.0 * eps } else { 0.5 * eps };
        if eps > 1e7 {
            return Err(Error::Init("step size diverged upward; the posterior may be improper".into()));
        }
        if eps == 0.0 {
            return Err(Error::Init("step size collapsed to zero".into()));
        }
    }
}

fn initial_point<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    jitter: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Point> {
    let dim = init.len();
    let attempts = if jitter > 0.0 { INIT_ATTEMPTS } else { 1 };
    for _ in 0..attempts {
        let q: Vec<f64> = init
            .iter()
            .map(|x| {
                if jitter > 0.0 {
                    x + jitter * rng.random_range(-2.0..2.0)
                } else {
                    *x
                }
            })
            .collect();
        let mut grad = vec![0.0; dim];
        let logp = target.log_density_and_grad(&q, &mut grad);
        if logp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(Point {
                q,
                p: vec![0.0; dim],
                grad,
                logp,
            });
        }
    }
    Err(Error::Init(format!(
        "log density is not finite at the initial point after {attempts} attempt(s)"
    )))
}

/// Runs one adaptive NUTS chain from `init` (jittered per `config`).
pub fn run_hmc<T: LogDensity + ?Sized>(target: &T, init: &[f64], config: &ChainConfig) -> Result<Draws> {
    config.validate()?;
    let dim = target.dim();
    if init.len() != dim {
        return Err(Error::domain(format!(
            "initial point has length {}, target dimension is {dim}",
            init.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = initial_point(target, init, config.init_jitter, &mut rng)?;
    let mut ham = Hamiltonian {
        target,
        inv_mass: vec![1.0; dim],
    };
    let max_depth = config.max_depth();

    let mut eps = find_step_size(&ham, &current, 1.0, &mut rng)?;
    let mut da = DualAveraging::new(config.target_accept, eps);
    let mut windows = Windows::new(config.n_warmup);
    let mut est = Welford::new(dim);

    for _ in 0..config.n_warmup {
        let out = transition(&ham, &mut current, eps, max_depth, &mut rng);
        eps = da.update(out.accept_stat);
        if let Some(var) = windows.observe(&mut est, &current.q) {
            ham.inv_mass = var;
            // Momenta are redrawn each transition, so only the point carries over.
            eps = find_step_size(&ham, &current, eps, &mut rng)?;
            da.restart(eps);
        }
    }
    eps = da.final_step();

    let mut values = Vec::with_capacity(config.n_draws * dim);
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    let mut n_leapfrog = 0;
    for _ in 0..config.n_draws {
        let out = transition(&ham, &mut current, eps, max_depth, &mut rng);
        accept_sum += out.accept_stat;
        divergences += out.divergent as usize;
        n_leapfrog += out.n_leapfrog;
        values.extend_from_slice(&current.q);
    }

    Ok(Draws {
        values,
        dim,
        names: (0..dim).map(|j| format!("x[{j}]")).collect(),
        accept_rate: accept_sum / config.n_draws as f64,
        divergence_count: divergences,
        divergence_flag: divergences as f64 > 0.1 * config.n_draws as f64,
        step_size: eps,
        inv_mass: ham.inv_mass,
        n_leapfrog,
    })
}

/// [`run_hmc`] for a log density and gradient given as closures.
pub fn run_hmc_fn<F, G>(logp: F, grad: G, init: &[f64], config: &ChainConfig) -> Result<Draws>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    let target = FnTarget {
        dim: init.len(),
        logp,
        grad,
    };
    run_hmc(&target, init, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal(dim: usize) -> impl LogDensity {
        FnTarget {
            dim,
            logp: |x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            grad: |x: &[f64], g: &mut [f64]| {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = -xi;
                }
            },
        }
    }

    #[test]
    fn max_depth_from_leapfrog_budget() {
        let mut c = ChainConfig::default();
        assert_eq!(c.max_depth(), 10);
        c.max_leapfrog = 1;
        assert_eq!(c.max_depth(), 0);
        c.max_leapfrog = 1000;
        assert_eq!(c.max_depth(), 9);
    }

    #[test]
    fn energy_is_nearly_conserved_by_leapfrog() {
        let t = std_normal(3);
        let ham = Hamiltonian {
            target: &t,
            inv_mass: vec![1.0; 3],
        };
        let mut z = Point {
            q: vec![0.3, -1.0, 0.5],
            p: vec![1.0, 0.2, -0.4],
            grad: vec![0.0; 3],
            logp: 0.0,
        };
        ham.refresh(&mut z);
        let h0 = ham.energy(&z);
        for _ in 0..100 {
            ham.leapfrog(&mut z, 0.05);
        }
        assert!((ham.energy(&z) - h0).abs() < 1e-3);
    }

    #[test]
    fn same_seed_same_draws() {
        let t = std_normal(2);
        let cfg = ChainConfig {
            n_warmup: 150,
            n_draws: 50,
            seed: 11,
            ..ChainConfig::default()
        };
        let a = run_hmc(&t, &[0.0, 0.0], &cfg).unwrap();
        let b = run_hmc(&t, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(a.as_flat(), b.as_flat());
        let c = run_hmc(&t, &[0.0, 0.0], &cfg.clone().with_seed(12)).unwrap();
        assert_ne!(a.as_flat(), c.as_flat());
    }

    #[test]
    fn non_finite_start_is_an_init_error() {
        let t = FnTarget {
            dim: 1,
            logp: |_: &[f64]| f64::NAN,
            grad: |_: &[f64], g: &mut [f64]| g[0] = 0.0,
        };
        let cfg = ChainConfig {
            n_warmup: 100,
            n_draws: 10,
            init_jitter: 0.0,
            ..ChainConfig::default()
        };
        assert!(matches!(run_hmc(&t, &[0.0], &cfg), Err(Error::Init(_))));
    }

    #[test]
    fn rejects_short_warmup() {
        let t = std_normal(1);
        let cfg = ChainConfig {
            n_warmup: 50,
            ..ChainConfig::default()
        };
        assert!(matches!(run_hmc(&t, &[0.0], &cfg), Err(Error::Config(_))));
    }
}
