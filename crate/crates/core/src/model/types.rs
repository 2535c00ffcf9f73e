use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sampled unit.
///
/// The inclusion probability is kept on the log scale; only its value up to a
/// positive constant carries information, so no normalization is imposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: f64,
    pub log_pi: f64,
    /// Design row of the response model. The first entry is 1.0 when the
    /// model carries an intercept.
    pub x_y: Vec<f64>,
    /// Design row of the inclusion-probability model, intercept first.
    pub x_pi: Vec<f64>,
}

impl Observation {
    /// Builds an observation from a raw (positive) inclusion probability.
    pub fn new(y: f64, pi: f64, x_y: Vec<f64>, x_pi: Vec<f64>) -> Result<Self> {
        if !(pi > 0.0) || !pi.is_finite() {
            return Err(Error::domain(format!(
                "inclusion probability must be positive and finite, got {pi}"
            )));
        }
        Self::with_log_pi(y, pi.ln(), x_y, x_pi)
    }

    pub fn with_log_pi(y: f64, log_pi: f64, x_y: Vec<f64>, x_pi: Vec<f64>) -> Result<Self> {
        let obs = Observation {
            y,
            log_pi,
            x_y,
            x_pi,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn pi(&self) -> f64 {
        self.log_pi.exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.log_pi.is_finite() {
            return Err(Error::domain("log inclusion probability is not finite"));
        }
        if !self.y.is_finite() {
            return Err(Error::domain("response is not finite"));
        }
        if self.x_pi.is_empty() {
            return Err(Error::domain("inclusion-model design row is empty"));
        }
        if self.x_y.iter().chain(&self.x_pi).any(|v| !v.is_finite()) {
            return Err(Error::domain("design row has non-finite entries"));
        }
        Ok(())
    }
}

/// Checks the per-observation invariants plus constant row lengths.
pub fn validate_dataset(data: &[Observation]) -> Result<(usize, usize)> {
    let first = data
        .first()
        .ok_or_else(|| Error::domain("dataset is empty"))?;
    let (p_y, p_pi) = (first.x_y.len(), first.x_pi.len());
    for (i, obs) in data.iter().enumerate() {
        obs.validate()
            .map_err(|e| Error::domain(format!("observation {i}: {e}")))?;
        if obs.x_y.len() != p_y || obs.x_pi.len() != p_pi {
            return Err(Error::domain(format!(
                "observation {i}: design row lengths ({}, {}) differ from ({p_y}, {p_pi})",
                obs.x_y.len(),
                obs.x_pi.len()
            )));
        }
    }
    Ok((p_y, p_pi))
}

/// Population-model parameters of the normal linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaLinear {
    pub beta: Vec<f64>,
    pub sigma_y: f64,
}

impl ThetaLinear {
    pub fn new(beta: Vec<f64>, sigma_y: f64) -> Result<Self> {
        if !(sigma_y > 0.0) || !sigma_y.is_finite() {
            return Err(Error::domain(format!("sigma_y must be positive, got {sigma_y}")));
        }
        Ok(ThetaLinear { beta, sigma_y })
    }
}

/// Parameters of the lognormal inclusion-probability model
/// `log pi | y ~ normal(kappa_y * y + x_pi . kappa_x, sigma_pi^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kappa {
    pub kappa_y: f64,
    pub kappa_x: Vec<f64>,
    pub sigma_pi: f64,
}

impl Kappa {
    pub fn new(kappa_y: f64, kappa_x: Vec<f64>, sigma_pi: f64) -> Result<Self> {
        if !(sigma_pi > 0.0) || !sigma_pi.is_finite() {
            return Err(Error::domain(format!("sigma_pi must be positive, got {sigma_pi}")));
        }
        Ok(Kappa {
            kappa_y,
            kappa_x,
            sigma_pi,
        })
    }
}

/// Coefficients of the probit link for a binary response.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaProbit {
    pub beta: Vec<f64>,
}

impl ThetaProbit {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("probit coefficients must be finite"));
        }
        Ok(ThetaProbit { beta })
    }
}

/// Population model for the response (or for the inclusion probabilities alone).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Probit,
    Spline,
    WeightsOnly,
}

/// How the sampling design enters the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Joint (y, pi) likelihood corrected by Bayes rule.
    Full,
    /// Likelihood contributions raised to normalized sampling weights.
    Pseudo,
    /// Unweighted likelihood; the design is ignored.
    Ignore,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Probit => "probit",
            ModelKind::Spline => "spline",
            ModelKind::WeightsOnly => "weights_only",
        }
    }
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Pseudo => "pseudo",
            Method::Ignore => "ignore",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "linear" => Ok(ModelKind::Linear),
            "probit" => Ok(ModelKind::Probit),
            "spline" => Ok(ModelKind::Spline),
            "weights_only" => Ok(ModelKind::WeightsOnly),
            other => Err(Error::domain(format!("unknown model kind '{other}'"))),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Method::Full),
            "pseudo" => Ok(Method::Pseudo),
            "ignore" | "srs" => Ok(Method::Ignore),
            other => Err(Error::domain(format!("unknown method '{other}'"))),
        }
    }
}
