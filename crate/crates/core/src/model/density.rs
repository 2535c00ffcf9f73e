//! Densities, moment generating functions and the sample-adjusted likelihood
//! contributions for a single observation.
//!
//! Every log-density keeps its normalizing constants, so `exp(log_ps_*)` is a
//! proper density over `(y, pi)` and can be checked against quadrature.

use std::f64::consts::PI;

use statrs::function::erf::erfc;

use super::types::{Kappa, Observation, ThetaLinear, ThetaProbit};
use crate::error::{Error, Result};

/// Probabilities closer than this to 0 or 1 are clamped before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Log density of `normal(mean, var)` at `z`.
#[inline]
pub fn log_normal_pdf(z: f64, mean: f64, var: f64) -> f64 {
    let d = z - mean;
    -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var)
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// MGF of `normal(m, s2)` evaluated at `t`.
pub fn mgf_normal(t: f64, m: f64, s2: f64) -> Result<f64> {
    if !(t.is_finite() && m.is_finite() && s2.is_finite()) {
        return Err(Error::domain("mgf_normal: non-finite input"));
    }
    if s2 < 0.0 {
        return Err(Error::domain(format!("mgf_normal: negative variance {s2}")));
    }
    Ok((t * m + 0.5 * t * t * s2).exp())
}

/// MGF of `Bernoulli(p)` evaluated at `t`: `1 - p + p e^t`.
pub fn mgf_bernoulli(t: f64, p: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::domain("mgf_bernoulli: non-finite t"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("mgf_bernoulli: p={p} outside [0, 1]")));
    }
    Ok(1.0 - p + p * t.exp())
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::domain(format!(
            "{what}: design row has length {got}, coefficients have length {want}"
        )));
    }
    Ok(())
}

/// Log of the size-biased inclusion-probability factor shared by every model:
/// `log normal(log pi; kappa_y * y + eta, s_pi^2) - eta - s_pi^2 / 2`.
#[inline]
fn log_pi_factor(log_pi: f64, y: f64, eta: f64, kappa_y: f64, var_pi: f64) -> f64 {
    log_normal_pdf(log_pi, kappa_y * y + eta, var_pi) - eta - 0.5 * var_pi
}

/// Log of the sample-adjusted joint density of `(y, pi)` under the normal
/// linear population model with a lognormal model for `pi | y`.
pub fn log_ps_linear(obs: &Observation, theta: &ThetaLinear, kappa: &Kappa) -> Result<f64> {
    check_len("log_ps_linear (y-model)", obs.x_y.len(), theta.beta.len())?;
    check_len("log_ps_linear (pi-model)", obs.x_pi.len(), kappa.kappa_x.len())?;
    let mu = dot(&obs.x_y, &theta.beta);
    let eta = dot(&obs.x_pi, &kappa.kappa_x);
    let var_y = theta.sigma_y * theta.sigma_y;
    let var_pi = kappa.sigma_pi * kappa.sigma_pi;
    let ky = kappa.kappa_y;
    Ok(log_pi_factor(obs.log_pi, obs.y, eta, ky, var_pi) - ky * mu - 0.5 * ky * ky * var_y
        + log_normal_pdf(obs.y, mu, var_y))
}

/// Success probability of the probit model, clamped away from 0 and 1.
pub fn probit_probability(x_y: &[f64], beta: &[f64]) -> f64 {
    std_normal_cdf(dot(x_y, beta)).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Log of the sample-adjusted joint density of `(y, pi)` for a binary response
/// with `P(y = 1) = Phi(x_y . beta)`.
pub fn log_ps_probit(obs: &Observation, theta: &ThetaProbit, kappa: &Kappa) -> Result<f64> {
    if obs.y != 0.0 && obs.y != 1.0 {
        return Err(Error::domain(format!("probit response must be 0 or 1, got {}", obs.y)));
    }
    check_len("log_ps_probit (y-model)", obs.x_y.len(), theta.beta.len())?;
    check_len("log_ps_probit (pi-model)", obs.x_pi.len(), kappa.kappa_x.len())?;
    let p = probit_probability(&obs.x_y, &theta.beta);
    let eta = dot(&obs.x_pi, &kappa.kappa_x);
    let var_pi = kappa.sigma_pi * kappa.sigma_pi;
    let mgf = mgf_bernoulli(kappa.kappa_y, p)?;
    Ok(log_pi_factor(obs.log_pi, obs.y, eta, kappa.kappa_y, var_pi) - mgf.ln()
        + bernoulli_log_pmf(obs.y, p))
}

#[inline]
pub(crate) fn bernoulli_log_pmf(y: f64, p: f64) -> f64 {
    if y == 1.0 {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// Log density of an observed inclusion probability when the response plays
/// no role. `kappa.kappa_y` is ignored.
///
/// As a density in `pi` this is exactly `lognormal(eta + s^2, s^2)`.
pub fn log_ps_weights_only(log_pi: f64, x_pi: &[f64], kappa: &Kappa) -> Result<f64> {
    check_len("log_ps_weights_only", x_pi.len(), kappa.kappa_x.len())?;
    let eta = dot(x_pi, &kappa.kappa_x);
    let var_pi = kappa.sigma_pi * kappa.sigma_pi;
    Ok(log_pi_factor(log_pi, 0.0, eta, 0.0, var_pi))
}

/// Sampling weights proportional to `1 / pi`, scaled so they sum to `n`.
pub fn normalize_weights(pi: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = pi.iter().find(|&&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::domain(format!(
            "inclusion probabilities must be positive and finite, got {bad}"
        )));
    }
    let n = pi.len() as f64;
    let inv_sum: f64 = pi.iter().map(|p| 1.0 / p).sum();
    Ok(pi.iter().map(|p| (1.0 / p) * n / inv_sum).collect())
}

/// Same as [`normalize_weights`] but from log inclusion probabilities; the
/// largest probability is factored out first to avoid overflow.
pub fn normalize_weights_log(log_pi: &[f64]) -> Result<Vec<f64>> {
    if log_pi.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("log inclusion probabilities must be finite"));
    }
    let max = log_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<f64> = log_pi.iter().map(|v| (v - max).exp()).collect();
    normalize_weights(&rel)
}

/// Weighted normal log-likelihood `sum_i w_i log normal(y_i; x_i . beta, s^2)`.
pub fn log_pseudo_likelihood(data: &[Observation], w: &[f64], theta: &ThetaLinear) -> Result<f64> {
    if w.len() != data.len() {
        return Err(Error::domain(format!(
            "{} weights for {} observations",
            w.len(),
            data.len()
        )));
    }
    if let Some(bad) = w.iter().find(|&&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::domain(format!("weights must be non-negative, got {bad}")));
    }
    let var = theta.sigma_y * theta.sigma_y;
    let mut total = 0.0;
    for (obs, &wi) in data.iter().zip(w) {
        check_len("log_pseudo_likelihood", obs.x_y.len(), theta.beta.len())?;
        total += wi * log_normal_pdf(obs.y, dot(&obs.x_y, &theta.beta), var);
    }
    Ok(total)
}

/// Density of `lognormal(mu, s2)` at `x > 0`.
pub fn lognormal_pdf(x: f64, mu: f64, s2: f64) -> f64 {
    let z = x.ln() - mu;
    (-z * z / (2.0 * s2)).exp() / (x * (2.0 * PI * s2).sqrt())
}
