use serde::{Deserialize, Serialize};

use super::Draws;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub ci_length: f64,
}

impl ParamSummary {
    pub fn covers(&self, truth: f64) -> bool {
        self.q025 <= truth && truth <= self.q975
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub params: Vec<ParamSummary>,
}

impl Summary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn describe(name: String, mut xs: Vec<f64>) -> ParamSummary {
    let n = xs.len() as f64;
    // Centering on the first draw keeps the mean exact for constant chains.
    let x0 = xs[0];
    let mean = x0 + xs.iter().map(|x| x - x0).sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    xs.sort_by(f64::total_cmp);
    let q025 = quantile_sorted(&xs, 0.025);
    let q975 = quantile_sorted(&xs, 0.975);
    ParamSummary {
        name,
        mean,
        sd,
        q025,
        q975,
        ci_length: q975 - q025,
    }
}

/// Posterior summaries of `constrain(draw)` for each draw. Output names are
/// the draw names when `constrain` preserves the dimension, `x[j]` otherwise.
pub fn summarize<F>(draws: &Draws, constrain: F) -> Summary
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mapped: Vec<Vec<f64>> = draws.rows().map(&constrain).collect();
    let width = mapped.first().map_or(0, Vec::len);
    let params = (0..width)
        .map(|j| {
            let name = if width == draws.dim() {
                draws.names[j].clone()
            } else {
                format!("x[{j}]")
            };
            describe(name, mapped.iter().map(|r| r[j]).collect())
        })
        .collect();
    Summary { params }
}
