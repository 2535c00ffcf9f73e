use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::types::{Kappa, Method, ModelKind, ThetaLinear, ThetaProbit};
use crate::error::{Error, Result};

/// Size of the penalized spline block at the front of `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplineBlock {
    /// Number of basis functions.
    pub b: usize,
    /// Difference-penalty order.
    pub k: usize,
}

/// Maps entries of an unconstrained parameter vector to model components.
///
/// Location parameters are stored raw and every positive scale is stored as its
/// natural log. Order: `beta`, `sigma_y`, `sigma_beta`, `kappa_y`, `kappa_x`,
/// `sigma_pi`, with absent components skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: ModelKind,
    pub method: Method,
    pub p_y: usize,
    pub p_pi: usize,
    pub spline: Option<SplineBlock>,
    pub(crate) beta: Range<usize>,
    pub(crate) sigma_y: Option<usize>,
    pub(crate) sigma_beta: Option<usize>,
    pub(crate) kappa_y: Option<usize>,
    pub(crate) kappa_x: Range<usize>,
    pub(crate) sigma_pi: Option<usize>,
    dim: usize,
}

impl Layout {
    pub fn new(
        kind: ModelKind,
        method: Method,
        p_y: usize,
        p_pi: usize,
        spline: Option<SplineBlock>,
    ) -> Result<Self> {
        match (kind, spline) {
            (ModelKind::Spline, None) => {
                return Err(Error::domain("spline model requires a spline block (b, k)"))
            }
            (ModelKind::Spline, Some(block)) => {
                if block.k == 0 || block.k >= block.b {
                    return Err(Error::domain(format!(
                        "penalty order k={} must satisfy 0 < k < b={}",
                        block.k, block.b
                    )));
                }
                if block.b > p_y {
                    return Err(Error::domain(format!(
                        "spline block b={} exceeds response design width {p_y}",
                        block.b
                    )));
                }
            }
            (_, Some(_)) => {
                return Err(Error::domain("spline block given for a non-spline model"))
            }
            _ => {}
        }
        if kind == ModelKind::WeightsOnly && method != Method::Full {
            return Err(Error::domain(
                "the weights-only model is defined only for the full method",
            ));
        }
        if kind != ModelKind::WeightsOnly && p_y == 0 {
            return Err(Error::domain("response design row is empty"));
        }
        let uses_pi = method == Method::Full;
        if uses_pi && p_pi == 0 {
            return Err(Error::domain("inclusion-model design row is empty"));
        }

        let mut next = 0usize;
        let mut take = |n: usize| {
            let r = next..next + n;
            next += n;
            r
        };
        let beta = take(if kind == ModelKind::WeightsOnly { 0 } else { p_y });
        let sigma_y = matches!(kind, ModelKind::Linear | ModelKind::Spline).then(|| take(1).start);
        let sigma_beta = (kind == ModelKind::Spline).then(|| take(1).start);
        let kappa_y = (uses_pi && kind != ModelKind::WeightsOnly).then(|| take(1).start);
        let kappa_x = if uses_pi { take(p_pi) } else { take(0) };
        let sigma_pi = uses_pi.then(|| take(1).start);
        let dim = next;

        Ok(Layout {
            kind,
            method,
            p_y,
            p_pi,
            spline,
            beta,
            sigma_y,
            sigma_beta,
            kappa_y,
            kappa_x,
            sigma_pi,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta_range(&self) -> Range<usize> {
        self.beta.clone()
    }

    pub fn kappa_x_range(&self) -> Range<usize> {
        self.kappa_x.clone()
    }

    pub fn sigma_y_index(&self) -> Option<usize> {
        self.sigma_y
    }

    pub fn sigma_beta_index(&self) -> Option<usize> {
        self.sigma_beta
    }

    pub fn kappa_y_index(&self) -> Option<usize> {
        self.kappa_y
    }

    pub fn sigma_pi_index(&self) -> Option<usize> {
        self.sigma_pi
    }

    /// True when entry `i` holds the log of a positive scale.
    pub fn is_log_scale(&self, i: usize) -> bool {
        [self.sigma_y, self.sigma_beta, self.sigma_pi].contains(&Some(i))
    }

    /// Constrained-scale parameter names, one per entry.
    pub fn names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.dim];
        for (j, i) in self.beta.clone().enumerate() {
            names[i] = format!("beta[{j}]");
        }
        for (j, i) in self.kappa_x.clone().enumerate() {
            names[i] = format!("kappa_x[{j}]");
        }
        let singles = [
            (self.sigma_y, "sigma_y"),
            (self.sigma_beta, "sigma_beta"),
            (self.kappa_y, "kappa_y"),
            (self.sigma_pi, "sigma_pi"),
        ];
        for (idx, name) in singles {
            if let Some(i) = idx {
                names[i] = name.to_string();
            }
        }
        names
    }

    /// Maps an unconstrained vector to the constrained scale (exp on log-scales).
    pub fn constrain(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.is_log_scale(i) { v.exp() } else { v })
            .collect()
    }

    pub fn unpack(&self, values: &[f64]) -> Result<Unpacked> {
        if values.len() != self.dim {
            return Err(Error::domain(format!(
                "parameter vector has length {}, layout expects {}",
                values.len(),
                self.dim
            )));
        }
        let scale = |idx: Option<usize>| -> Result<Option<f64>> {
            idx.map(|i| {
                let s = values[i].exp();
                if s > 0.0 && s.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::domain(format!("log-scale entry {i} = {} overflows", values[i])))
                }
            })
            .transpose()
        };
        let kappa = match self.sigma_pi {
            Some(_) => Some(Kappa {
                kappa_y: self.kappa_y.map_or(0.0, |i| values[i]),
                kappa_x: values[self.kappa_x.clone()].to_vec(),
                sigma_pi: scale(self.sigma_pi)?.expect("sigma_pi present"),
            }),
            None => None,
        };
        Ok(Unpacked {
            beta: values[self.beta.clone()].to_vec(),
            sigma_y: scale(self.sigma_y)?,
            sigma_beta: scale(self.sigma_beta)?,
            kappa,
        })
    }

    pub fn pack(&self, parts: &Unpacked) -> Result<ParamVector> {
        let mut values = vec![0.0; self.dim];
        if parts.beta.len() != self.beta.len() {
            return Err(Error::domain(format!(
                "beta has length {}, layout expects {}",
                parts.beta.len(),
                self.beta.len()
            )));
        }
        values[self.beta.clone()].copy_from_slice(&parts.beta);
        let mut put_scale = |idx: Option<usize>, v: Option<f64>, name: &str| -> Result<()> {
            match (idx, v) {
                (Some(i), Some(s)) if s > 0.0 => {
                    values[i] = s.ln();
                    Ok(())
                }
                (None, _) => Ok(()),
                _ => Err(Error::domain(format!("{name} missing or not positive"))),
            }
        };
        put_scale(self.sigma_y, parts.sigma_y, "sigma_y")?;
        put_scale(self.sigma_beta, parts.sigma_beta, "sigma_beta")?;
        if self.sigma_pi.is_some() {
            let kappa = parts
                .kappa
                .as_ref()
                .ok_or_else(|| Error::domain("layout requires kappa"))?;
            if kappa.kappa_x.len() != self.kappa_x.len() {
                return Err(Error::domain("kappa_x length does not match layout"));
            }
            put_scale(self.sigma_pi, Some(kappa.sigma_pi), "sigma_pi")?;
            if let Some(i) = self.kappa_y {
                values[i] = kappa.kappa_y;
            }
            values[self.kappa_x.clone()].copy_from_slice(&kappa.kappa_x);
        }
        Ok(ParamVector {
            values,
            layout: self.clone(),
        })
    }
}

/// Model components decoded from a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Unpacked {
    pub beta: Vec<f64>,
    pub sigma_y: Option<f64>,
    pub sigma_beta: Option<f64>,
    pub kappa: Option<Kappa>,
}

impl Unpacked {
    pub fn theta_linear(&self) -> Option<ThetaLinear> {
        self.sigma_y.map(|sigma_y| ThetaLinear {
            beta: self.beta.clone(),
            sigma_y,
        })
    }

    pub fn theta_probit(&self) -> ThetaProbit {
        ThetaProbit {
            beta: self.beta.clone(),
        }
    }
}

/// Unconstrained parameter vector together with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Layout) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::domain(format!(
                "parameter vector has length {}, layout expects {}",
                values.len(),
                layout.dim()
            )));
        }
        Ok(ParamVector { values, layout })
    }

    pub fn unpack(&self) -> Result<Unpacked> {
        self.layout.unpack(&self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slr_full_layout() {
        let l = Layout::new(ModelKind::Linear, Method::Full, 2, 1, None).unwrap();
        assert_eq!(l.dim(), 6);
        assert_eq!(
            l.names(),
            ["beta[0]", "beta[1]", "sigma_y", "kappa_y", "kappa_x[0]", "sigma_pi"]
        );
        let p = Layout::new(ModelKind::Linear, Method::Pseudo, 2, 1, None).unwrap();
        assert_eq!(p.names(), ["beta[0]", "beta[1]", "sigma_y"]);
    }

    #[test]
    fn spline_and_weights_only_layouts() {
        let block = SplineBlock { b: 8, k: 4 };
        let l = Layout::new(ModelKind::Spline, Method::Full, 8, 1, Some(block)).unwrap();
        assert_eq!(l.dim(), 8 + 2 + 3);
        assert!(l.is_log_scale(9));
        let w = Layout::new(ModelKind::WeightsOnly, Method::Full, 0, 1, None).unwrap();
        assert_eq!(w.names(), ["kappa_x[0]", "sigma_pi"]);
        assert!(Layout::new(ModelKind::WeightsOnly, Method::Pseudo, 0, 1, None).is_err());
        assert!(Layout::new(ModelKind::Spline, Method::Full, 8, 1, None).is_err());
        let bad = SplineBlock { b: 8, k: 8 };
        assert!(Layout::new(ModelKind::Spline, Method::Full, 8, 1, Some(bad)).is_err());
    }

    #[test]
    fn probit_has_no_sigma_y() {
        let l = Layout::new(ModelKind::Probit, Method::Full, 2, 2, None).unwrap();
        assert_eq!(l.names(), ["beta[0]", "beta[1]", "kappa_y", "kappa_x[0]", "kappa_x[1]", "sigma_pi"]);
    }

    proptest! {
        #[test]
        fn unpack_then_pack_is_identity(values in proptest::collection::vec(-5.0f64..5.0, 6)) {
            let l = Layout::new(ModelKind::Linear, Method::Full, 2, 1, None).unwrap();
            let parts = l.unpack(&values).unwrap();
            prop_assert!(parts.sigma_y.unwrap() > 0.0);
            prop_assert!(parts.kappa.as_ref().unwrap().sigma_pi > 0.0);
            let back = l.pack(&parts).unwrap();
            for (a, b) in back.values.iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
            }
        }
    }
}
