use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::commands::FitResult;
use super::config::RunConfig;
use super::{fmt_f64, write_atomic};
use crate::error::{Error, Result};
use crate::harness::{mean_of, CurveMetrics, MetricsTable, WeightDistResult};
use crate::sampler::Summary;

/// What a command produced; stored in `run.json` so plot files can be
/// regenerated without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RunResult {
    Study(MetricsTable),
    Curve(CurveMetrics),
    WeightDist(WeightDistResult),
    Fit(FitResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub config: RunConfig,
    pub wall_time_secs: f64,
    pub result: RunResult,
}

pub const RUN_FILE: &str = "run.json";

pub fn write_run_record(record: &RunRecord, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(RUN_FILE);
    let mut bytes = serde_json::to_vec_pretty(record)?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}

pub fn read_run_record(dir: &Path) -> Result<RunRecord> {
    let path = dir.join(RUN_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        write_atomic(path, &bytes)?;
        Ok(path.to_path_buf())
    }
}

fn nums(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| fmt_f64(*v)).collect()
}

fn metrics_table() -> Table {
    Table::new(&["method", "bias", "mse", "coverage_95", "avg_ci_length"])
}

fn summary_table(summary: &Summary, rhat: Option<&[f64]>) -> Table {
    let mut header = vec!["param", "mean", "sd", "q2_5", "q97_5", "ci_length"];
    if rhat.is_some() {
        header.push("rhat");
    }
    let mut t = Table::new(&header);
    for (i, p) in summary.params.iter().enumerate() {
        let mut row = vec![p.name.clone()];
        row.extend(nums(&[p.mean, p.sd, p.q025, p.q975, p.ci_length]));
        if let Some(r) = rhat {
            row.push(fmt_f64(r[i]));
        }
        t.push(row);
    }
    t
}

/// Writes the CSV files for a result into `dir` and returns their paths.
/// Output depends only on `result`, so rewriting from `run.json` is
/// byte-identical.
pub fn write_report(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    match result {
        RunResult::Study(m) => {
            let mut t = metrics_table();
            for x in &m.methods {
                let mut row = vec![x.method.to_string()];
                row.extend(nums(&[x.bias, x.mse, x.coverage_95, x.avg_ci_length]));
                t.push(row);
            }
            out.push(t.write(&dir.join("metrics.csv"))?);

            let mut e = Table::new(&["replicate", "method", "point_estimate", "ci_low", "ci_high", "covered"]);
            for r in &m.results {
                let mut row = vec![r.replicate.to_string(), r.method.to_string()];
                row.extend(nums(&[r.point_estimate, r.ci_low, r.ci_high]));
                row.push(u8::from(r.covered).to_string());
                e.push(row);
            }
            out.push(e.write(&dir.join("estimates.csv"))?);
        }
        RunResult::Curve(c) => {
            // Grid averages of the pointwise metrics.
            let mut t = metrics_table();
            for m in &c.methods {
                let mut row = vec![m.method.to_string()];
                row.extend(nums(&[
                    mean_of(&m.bias),
                    mean_of(&m.mse),
                    mean_of(&m.coverage),
                    mean_of(&m.avg_ci_length),
                ]));
                t.push(row);
            }
            out.push(t.write(&dir.join("metrics.csv"))?);
            for m in &c.methods {
                let mut t = Table::new(&["x", "truth", "mean_fit", "bias", "mse", "coverage", "avg_ci_length"]);
                for g in 0..c.grid.len() {
                    t.push(nums(&[
                        c.grid[g],
                        c.truth[g],
                        m.mean_fit[g],
                        m.bias[g],
                        m.mse[g],
                        m.coverage[g],
                        m.avg_ci_length[g],
                    ]));
                }
                out.push(t.write(&dir.join(format!("curve_{}.csv", m.method)))?);
            }
        }
        RunResult::WeightDist(w) => {
            out.push(summary_table(&w.summary, None).write(&dir.join("summary.csv"))?);
            let mut h = Table::new(&["bin_lo", "bin_hi", "count", "density"]);
            for b in &w.plot.histogram {
                h.push(vec![fmt_f64(b.lo), fmt_f64(b.hi), b.count.to_string(), fmt_f64(b.density)]);
            }
            out.push(h.write(&dir.join("histogram.csv"))?);
            let mut d = Table::new(&["log_pi", "population_density", "fitted_density"]);
            for i in 0..w.plot.grid.len() {
                d.push(nums(&[w.plot.grid[i], w.plot.population_density[i], w.plot.fitted_density[i]]));
            }
            out.push(d.write(&dir.join("density.csv"))?);
        }
        RunResult::Fit(f) => {
            out.push(summary_table(&f.summary, f.rhat.as_deref()).write(&dir.join("summary.csv"))?);
            if let Some(c) = &f.curve {
                let mut t = Table::new(&["x", "mean", "lo", "hi"]);
                for i in 0..c.x.len() {
                    t.push(nums(&[c.x[i], c.mean[i], c.lo[i], c.hi[i]]));
                }
                out.push(t.write(&dir.join(format!("curve_{}.csv", f.method)))?);
            }
        }
    }
    Ok(out)
}
