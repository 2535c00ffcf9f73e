//! Population models, the sample-adjusted likelihood and its comparators.

pub mod density;
pub mod params;
pub mod posterior;
pub mod prior;
pub mod quadrature;
pub mod types;

pub use density::{
    log_normal_pdf, log_ps_linear, log_ps_probit, log_ps_weights_only, log_pseudo_likelihood,
    lognormal_pdf, mgf_bernoulli, mgf_normal, normalize_weights, std_normal_cdf,
};
pub use params::{Layout, ParamVector, SplineBlock, Unpacked};
pub use posterior::{grad_log_posterior, log_posterior, ModelSpec, Posterior};
pub use prior::{log_prior, log_spline_penalty};
pub use quadrature::{denominator_oracle, GaussHermite};
pub use types::{Kappa, Method, ModelKind, Observation, ThetaLinear, ThetaProbit};
