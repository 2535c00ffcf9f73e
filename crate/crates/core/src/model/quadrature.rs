//! Gauss–Hermite quadrature and the quadrature route to the selection
//! denominator `E_y[E(pi | y)]`.

use std::f64::consts::PI;

use super::density::dot;
use super::types::{Kappa, ThetaLinear};
use crate::error::{Error, Result};

/// Nodes and weights for `int f(x) exp(-x^2) dx`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Computes an `n`-point rule by Newton iteration on the orthonormal
    /// Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (PIM4, 0.0);
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        GaussHermite { nodes, weights }
    }

    /// `E[f(Y)]` for `Y ~ normal(mean, sd^2)`.
    pub fn normal_expectation(&self, mean: f64, sd: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sd;
        let total: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mean + scale * x))
            .sum();
        total / PI.sqrt()
    }
}

/// Number of nodes used by [`denominator_oracle`].
pub const ORACLE_NODES: usize = 64;

/// `E_{y | x, theta}[E(pi | y, x, kappa)]` by 64-node Gauss–Hermite over `y`,
/// with the inner lognormal mean in closed form.
///
/// This is a check on the closed-form denominator
/// `exp(x_pi . kappa_x + s_pi^2 / 2) * M_y(kappa_y)` and is not used by the
/// likelihood itself.
pub fn denominator_oracle(
    theta: &ThetaLinear,
    kappa: &Kappa,
    x_y: &[f64],
    x_pi: &[f64],
) -> Result<f64> {
    if x_y.len() != theta.beta.len() || x_pi.len() != kappa.kappa_x.len() {
        return Err(Error::domain("denominator_oracle: design/coefficient length mismatch"));
    }
    let rule = GaussHermite::new(ORACLE_NODES);
    let mu = dot(x_y, &theta.beta);
    let eta = dot(x_pi, &kappa.kappa_x);
    let half_var_pi = 0.5 * kappa.sigma_pi * kappa.sigma_pi;
    let value = rule.normal_expectation(mu, theta.sigma_y, |y| {
        (kappa.kappa_y * y + eta + half_var_pi).exp()
    });
    if !value.is_finite() {
        return Err(Error::Numerical {
            index: 0,
            message: "quadrature of the selection denominator is not finite".into(),
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [1, 2, 5, 20, 64] {
            let r = GaussHermite::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - PI.sqrt()).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn integrates_normal_moments() {
        let r = GaussHermite::new(64);
        let m2 = r.normal_expectation(0.0, 1.0, |y| y * y);
        let m4 = r.normal_expectation(0.0, 1.0, |y| y.powi(4));
        let m1 = r.normal_expectation(1.5, 2.0, |y| y);
        assert!((m2 - 1.0).abs() < 1e-13);
        assert!((m4 - 3.0).abs() < 1e-12);
        assert!((m1 - 1.5).abs() < 1e-13);
    }

    #[test]
    fn nodes_are_symmetric_and_sorted() {
        let r = GaussHermite::new(64);
        for i in 0..64 {
            assert!((r.nodes[i] + r.nodes[63 - i]).abs() < 1e-13);
        }
        // Largest node of the 64-point rule.
        assert!((r.nodes[0] - 10.526_123_167_960_546).abs() < 1e-9, "{}", r.nodes[0]);
    }

    #[test]
    fn oracle_trivial_cases() {
        let theta = ThetaLinear::new(vec![0.0], 1.0).unwrap();
        let k0 = Kappa::new(0.0, vec![0.3], 0.8).unwrap();
        let v = denominator_oracle(&theta, &k0, &[1.0], &[1.0]).unwrap();
        assert!((v - (0.3f64 + 0.32).exp()).abs() < 1e-13);
        let k1 = Kappa::new(1.0, vec![0.0], 1.0).unwrap();
        let v = denominator_oracle(&theta, &k1, &[1.0], &[1.0]).unwrap();
        assert!((v - std::f64::consts::E).abs() < 1e-13);
    }
}
