//! Priors on the unconstrained scale, log-Jacobians included.
//!
//! Linear, probit and weights-only models: coefficients ~ normal(0, 100) and
//! normal+(0, 1) on the *variances* `sigma_y^2`, `sigma_pi^2`.
//! Spline model: `sigma_y ~ normal+(0, 10)` (variance 10),
//! `sigma_beta ~ half-Cauchy(0, 10)`, `sigma_pi ~ half-Cauchy(0, 1)`, and the
//! rank-deficient difference penalty on the spline block of `beta`.

use std::f64::consts::PI;

use super::params::{Layout, ParamVector};
use super::types::ModelKind;
use crate::error::{Error, Result};
use crate::splines;

/// Prior variance of every regression coefficient (`beta`, `kappa`).
pub const COEF_PRIOR_VAR: f64 = 100.0;
/// Variance of the half-normal prior on `sigma_y` in the spline model.
pub const SPLINE_SIGMA_Y_PRIOR_VAR: f64 = 10.0;
/// Scale of the half-Cauchy prior on `sigma_beta`.
pub const SIGMA_BETA_CAUCHY_SCALE: f64 = 10.0;
/// Scale of the half-Cauchy prior on `sigma_pi` in the spline model.
pub const SPLINE_SIGMA_PI_CAUCHY_SCALE: f64 = 1.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// normal(0, var) on a raw coordinate; returns (log density, d/dx).
#[inline]
fn coef(x: f64, var: f64) -> (f64, f64) {
    (-0.5 * (LN_2PI + var.ln()) - x * x / (2.0 * var), -x / var)
}

/// normal+(0, 1) on the variance `v = exp(2u)`, as a density in `u`.
#[inline]
fn half_normal_on_variance(u: f64) -> (f64, f64) {
    let v = (2.0 * u).exp();
    let lp = std::f64::consts::LN_2 - 0.5 * LN_2PI - 0.5 * v * v;
    (lp + std::f64::consts::LN_2 + 2.0 * u, 2.0 - 2.0 * v * v)
}

/// normal+(0, var) on the scale `s = exp(u)`, as a density in `u`.
#[inline]
fn half_normal_on_scale(u: f64, var: f64) -> (f64, f64) {
    let s2 = (2.0 * u).exp();
    let lp = std::f64::consts::LN_2 - 0.5 * (LN_2PI + var.ln()) - s2 / (2.0 * var);
    (lp + u, 1.0 - s2 / var)
}

/// half-Cauchy(0, scale) on `s = exp(u)`, as a density in `u`.
#[inline]
fn half_cauchy_on_scale(u: f64, scale: f64) -> (f64, f64) {
    let r2 = (2.0 * u).exp() / (scale * scale);
    let lp = (2.0 / (PI * scale)).ln() - r2.ln_1p();
    (lp + u, 1.0 - 2.0 * r2 / (1.0 + r2))
}

/// Log of the improper difference-penalty kernel
/// `(sigma_beta^2)^{-(b-k)/2} exp(-beta' Q beta / (2 sigma_beta^2))`.
pub fn log_spline_penalty(beta: &[f64], sigma_beta: f64, q: &[f64], b: usize, k: usize) -> Result<f64> {
    if beta.len() != b || q.len() != b * b {
        return Err(Error::domain("log_spline_penalty: beta or Q has the wrong size"));
    }
    if !(sigma_beta > 0.0) {
        return Err(Error::domain("sigma_beta must be positive"));
    }
    let quad = quad_form(q, beta);
    let s2 = sigma_beta * sigma_beta;
    Ok(-((b - k) as f64 / 2.0) * s2.ln() - quad / (2.0 * s2))
}

pub(crate) fn quad_form(q: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let row = &q[i * n..(i + 1) * n];
        total += x[i] * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    total
}

/// Prior evaluator for one layout; caches the penalty matrix.
#[derive(Debug, Clone)]
pub struct Prior {
    layout: Layout,
    penalty: Option<Vec<f64>>,
}

impl Prior {
    pub fn new(layout: &Layout) -> Result<Self> {
        let penalty = match layout.spline {
            Some(block) => Some(splines::penalty_matrix(block.b, block.k)?.as_slice().to_vec()),
            None => None,
        };
        Ok(Prior {
            layout: layout.clone(),
            penalty,
        })
    }

    /// Log prior density at `x`; when `grad` is given, its gradient is added
    /// into it.
    pub fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        let mut lp = 0.0;
        let mut add = |i: usize, (v, g): (f64, f64), grad: &mut Option<&mut [f64]>| {
            lp += v;
            if let Some(gr) = grad.as_deref_mut() {
                gr[i] += g;
            }
        };
        let spline = l.kind == ModelKind::Spline;
        let penalized = l.spline.map_or(0, |s| s.b);

        for i in l.beta.clone() {
            if i - l.beta.start >= penalized {
                add(i, coef(x[i], COEF_PRIOR_VAR), &mut grad);
            }
        }
        if let Some(i) = l.kappa_y {
            add(i, coef(x[i], COEF_PRIOR_VAR), &mut grad);
        }
        for i in l.kappa_x.clone() {
            add(i, coef(x[i], COEF_PRIOR_VAR), &mut grad);
        }
        if let Some(i) = l.sigma_y {
            let term = if spline {
                half_normal_on_scale(x[i], SPLINE_SIGMA_Y_PRIOR_VAR)
            } else {
                half_normal_on_variance(x[i])
            };
            add(i, term, &mut grad);
        }
        if let Some(i) = l.sigma_pi {
            let term = if spline {
                half_cauchy_on_scale(x[i], SPLINE_SIGMA_PI_CAUCHY_SCALE)
            } else {
                half_normal_on_variance(x[i])
            };
            add(i, term, &mut grad);
        }
        if let (Some(i), Some(q), Some(block)) = (l.sigma_beta, &self.penalty, l.spline) {
            add(i, half_cauchy_on_scale(x[i], SIGMA_BETA_CAUCHY_SCALE), &mut grad);
            let b = block.b;
            let beta = &x[l.beta.start..l.beta.start + b];
            let inv_s2 = (-2.0 * x[i]).exp();
            let r = (b - block.k) as f64;
            let mut q_beta = vec![0.0; b];
            for (row, out) in q.chunks_exact(b).zip(q_beta.iter_mut()) {
                *out = row.iter().zip(beta).map(|(a, c)| a * c).sum();
            }
            let quad: f64 = q_beta.iter().zip(beta).map(|(a, c)| a * c).sum();
            lp += -r * x[i] - 0.5 * quad * inv_s2;
            if let Some(gr) = grad.as_deref_mut() {
                gr[i] += -r + quad * inv_s2;
                for (j, qb) in q_beta.iter().enumerate() {
                    gr[l.beta.start + j] -= qb * inv_s2;
                }
            }
        }
        lp
    }
}

/// Log prior of `params` for the given model kind, on the unconstrained scale.
pub fn log_prior(params: &ParamVector, kind: ModelKind) -> Result<f64> {
    if params.layout.kind != kind {
        return Err(Error::domain(format!(
            "parameter layout is for the {} model, not {kind}",
            params.layout.kind
        )));
    }
    Ok(Prior::new(&params.layout)?.eval(&params.values, None))
}
