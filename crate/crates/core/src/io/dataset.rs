//! CSV ingestion of survey data.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Observation;
use crate::splines::SplineBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// Sampling weight, proportional to `1 / pi`.
    Weight,
    #[serde(alias = "inclusion-prob")]
    InclusionProb,
}

impl std::str::FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "weight" => Ok(WeightKind::Weight),
            "inclusion_prob" | "pi" => Ok(WeightKind::InclusionProb),
            other => Err(Error::Config(format!("unknown weight kind `{other}`"))),
        }
    }
}

fn default_bases() -> usize {
    8
}

fn default_order() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub response_column: String,
    pub weight_column: String,
    pub weight_kind: WeightKind,
    #[serde(default)]
    pub y_covariates: Vec<String>,
    /// Covariates of the inclusion model. A categorical column listed here is
    /// dummy-coded into the inclusion model as well.
    #[serde(default)]
    pub pi_covariates: Vec<String>,
    #[serde(default)]
    pub spline_column: Option<String>,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    /// Columns (response or covariates) replaced by their natural log.
    #[serde(default)]
    pub log_columns: Vec<String>,
    #[serde(default = "default_bases")]
    pub spline_bases: usize,
    #[serde(default = "default_order")]
    pub spline_penalty_order: usize,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, response: &str, weight: &str, kind: WeightKind) -> Self {
        DatasetSpec {
            path: path.into(),
            response_column: response.into(),
            weight_column: weight.into(),
            weight_kind: kind,
            y_covariates: Vec::new(),
            pi_covariates: Vec::new(),
            spline_column: None,
            categorical_columns: Vec::new(),
            log_columns: Vec::new(),
            spline_bases: default_bases(),
            spline_penalty_order: default_order(),
        }
    }
}

/// A loaded dataset with its design-column names and deletion counts.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    pub y_names: Vec<String>,
    pub pi_names: Vec<String>,
    pub dropped_missing: usize,
    pub dropped_weight: usize,
    /// Basis for the spline column, spanning its observed range.
    pub basis: Option<SplineBasis>,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") || f == "."
}

fn column_index(headers: &HashMap<String, usize>, name: &str, path: &Path) -> Result<usize> {
    headers
        .get(name)
        .copied()
        .ok_or_else(|| Error::Dataset(format!("{}: no column named `{name}`", path.display())))
}

struct Row {
    y: f64,
    w: f64,
    numeric: Vec<f64>,
    levels: Vec<String>,
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&spec.path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(&spec.path, io),
            other => Error::Dataset(format!("{}: {other:?}", spec.path.display())),
        })?;
    let headers: HashMap<String, usize> = reader
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let path = spec.path.as_path();

    let cats: BTreeSet<&str> = spec.categorical_columns.iter().map(String::as_str).collect();
    // Numeric covariates in order of first appearance: y covariates, spline
    // column, then π-only covariates.
    let mut numeric_names: Vec<String> = Vec::new();
    let mut push_numeric = |name: &String| {
        if !cats.contains(name.as_str()) && !numeric_names.contains(name) {
            numeric_names.push(name.clone());
        }
    };
    spec.y_covariates.iter().for_each(&mut push_numeric);
    if let Some(s) = &spec.spline_column {
        push_numeric(s);
    }
    spec.pi_covariates.iter().for_each(&mut push_numeric);

    let y_idx = column_index(&headers, &spec.response_column, path)?;
    let w_idx = column_index(&headers, &spec.weight_column, path)?;
    let num_idx: Vec<usize> = numeric_names
        .iter()
        .map(|n| column_index(&headers, n, path))
        .collect::<Result<_>>()?;
    let cat_idx: Vec<usize> = spec
        .categorical_columns
        .iter()
        .map(|n| column_index(&headers, n, path))
        .collect::<Result<_>>()?;
    let logged = |name: &str| spec.log_columns.iter().any(|c| c == name);

    let parse = |field: &str, col: &str, line: u64| -> Result<f64> {
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::Dataset(format!("line {line}: column `{col}` has non-numeric value `{field}`")))?;
        if logged(col) {
            if !(v > 0.0) {
                return Err(Error::Dataset(format!(
                    "line {line}: cannot log-transform non-positive `{col}` value {v}"
                )));
            }
            Ok(v.ln())
        } else {
            Ok(v)
        }
    };

    let mut rows = Vec::new();
    let (mut dropped_missing, mut dropped_weight) = (0usize, 0usize);
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let required = std::iter::once(y_idx)
            .chain(std::iter::once(w_idx))
            .chain(num_idx.iter().copied())
            .chain(cat_idx.iter().copied());
        if required.clone().any(|i| record.get(i).is_none_or(is_missing)) {
            dropped_missing += 1;
            continue;
        }
        let w: f64 = record[w_idx]
            .parse()
            .map_err(|_| Error::Dataset(format!("line {line}: weight `{}` is not numeric", &record[w_idx])))?;
        if !(w > 0.0 && w.is_finite()) {
            dropped_weight += 1;
            continue;
        }
        rows.push(Row {
            y: parse(&record[y_idx], &spec.response_column, line)?,
            w,
            numeric: num_idx
                .iter()
                .zip(&numeric_names)
                .map(|(&i, n)| parse(&record[i], n, line))
                .collect::<Result<_>>()?,
            levels: cat_idx.iter().map(|&i| record[i].to_string()).collect(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Dataset(format!(
            "{}: no usable rows ({dropped_missing} with missing fields, {dropped_weight} with non-positive weight)",
            path.display()
        )));
    }

    // Reference coding: levels sorted, the first one dropped.
    let levels: Vec<Vec<String>> = (0..cat_idx.len())
        .map(|c| {
            let set: BTreeSet<&str> = rows.iter().map(|r| r.levels[c].as_str()).collect();
            set.into_iter().map(String::from).collect()
        })
        .collect();

    let pos = |name: &str| numeric_names.iter().position(|n| n == name);
    let basis = match &spec.spline_column {
        Some(col) => {
            let j = pos(col).expect("spline column registered");
            let xs: Vec<f64> = rows.iter().map(|r| r.numeric[j]).collect();
            Some(SplineBasis::new(&xs, spec.spline_bases, 3, spec.spline_penalty_order)?)
        }
        None => None,
    };

    let mut y_names = Vec::new();
    if let (Some(b), Some(col)) = (&basis, &spec.spline_column) {
        y_names.extend((0..b.dim()).map(|j| format!("B{j}({col})")));
    } else {
        y_names.push("(Intercept)".to_string());
    }
    let y_numeric: Vec<usize> = spec
        .y_covariates
        .iter()
        .filter(|n| !cats.contains(n.as_str()))
        .map(|n| pos(n).expect("registered"))
        .collect();
    y_names.extend(y_numeric.iter().map(|&j| numeric_names[j].clone()));
    let dummy_names = |c: usize| -> Vec<String> {
        levels[c][1..]
            .iter()
            .map(|l| format!("{}={l}", spec.categorical_columns[c]))
            .collect()
    };
    for c in 0..cat_idx.len() {
        y_names.extend(dummy_names(c));
    }

    let pi_numeric: Vec<usize> = spec
        .pi_covariates
        .iter()
        .filter(|n| !cats.contains(n.as_str()))
        .map(|n| pos(n).expect("registered"))
        .collect();
    let pi_cats: Vec<usize> = (0..cat_idx.len())
        .filter(|&c| spec.pi_covariates.contains(&spec.categorical_columns[c]))
        .collect();
    let mut pi_names = vec!["(Intercept)".to_string()];
    pi_names.extend(pi_numeric.iter().map(|&j| numeric_names[j].clone()));
    for &c in &pi_cats {
        pi_names.extend(dummy_names(c));
    }

    let dummies = |row: &Row, c: usize, out: &mut Vec<f64>| {
        out.extend(levels[c][1..].iter().map(|l| f64::from(u8::from(*l == row.levels[c]))));
    };
    let spline_pos = spec.spline_column.as_deref().and_then(pos);
    let observations = rows
        .iter()
        .map(|row| {
            let mut x_y = match (&basis, spline_pos) {
                (Some(b), Some(j)) => b.eval_row(row.numeric[j]),
                _ => vec![1.0],
            };
            x_y.extend(y_numeric.iter().map(|&j| row.numeric[j]));
            for c in 0..cat_idx.len() {
                dummies(row, c, &mut x_y);
            }
            let mut x_pi = vec![1.0];
            x_pi.extend(pi_numeric.iter().map(|&j| row.numeric[j]));
            for &c in &pi_cats {
                dummies(row, c, &mut x_pi);
            }
            let log_pi = match spec.weight_kind {
                WeightKind::Weight => -row.w.ln(),
                WeightKind::InclusionProb => row.w.ln(),
            };
            Observation::with_log_pi(row.y, log_pi, x_y, x_pi)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        observations,
        y_names,
        pi_names,
        dropped_missing,
        dropped_weight,
        basis,
    })
}

/// Writes observations as `y,pi,x1..,z1..` with inclusion probabilities,
/// readable back by [`load_dataset`] with `weight_kind = inclusion_prob`.
pub fn write_observations(path: &Path, data: &[Observation]) -> Result<()> {
    let first = data.first().ok_or_else(|| Error::Dataset("nothing to write".into()))?;
    let mut header = vec!["y".to_string(), "pi".to_string()];
    header.extend((0..first.x_y.len()).map(|j| format!("x{j}")));
    header.extend((0..first.x_pi.len()).map(|j| format!("z{j}")));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for o in data {
        let mut rec = vec![super::fmt_f64(o.y), super::fmt_f64(o.pi())];
        rec.extend(o.x_y.iter().chain(&o.x_pi).map(|v| super::fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    super::write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, contents).unwrap();
        (dir, p)
    }

    #[test]
    fn weights_become_reciprocal_probabilities() {
        let (_d, p) = write_tmp("y,weight,x1\n1.0,1,0.5\n2.0,2,0.1\n3.0,4,0.2\n");
        let mut spec = DatasetSpec::new(&p, "y", "weight", WeightKind::Weight);
        spec.y_covariates = vec!["x1".into()];
        let ds = load_dataset(&spec).unwrap();
        let pi: Vec<f64> = ds.observations.iter().map(|o| o.pi()).collect();
        assert_eq!(pi, vec![1.0, 0.5, 0.25]);
        assert_eq!(ds.observations[1].x_y, vec![1.0, 0.1]);
        assert_eq!(ds.y_names, vec!["(Intercept)", "x1"]);
    }

    #[test]
    fn categorical_reference_coding() {
        let mut s = String::from("y,w,age\n");
        for (i, lvl) in ["a", "b", "c", "d", "e", "f", "g", "a"].iter().enumerate() {
            s.push_str(&format!("{i},1,{lvl}\n"));
        }
        let (_d, p) = write_tmp(&s);
        let mut spec = DatasetSpec::new(&p, "y", "w", WeightKind::Weight);
        spec.categorical_columns = vec!["age".into()];
        let ds = load_dataset(&spec).unwrap();
        assert_eq!(ds.y_names.len(), 1 + 6);
        assert_eq!(ds.observations[0].x_y, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(ds.observations[2].x_y[2], 1.0);
        assert_eq!(ds.observations[0].x_pi, vec![1.0]);
    }

    #[test]
    fn drops_missing_and_zero_weight_rows() {
        let (_d, p) = write_tmp("y,w,x\n1,1,0\n2,0,1\n,1,2\n4,1,NA\n5,-2,3\n6,1,1\n");
        let mut spec = DatasetSpec::new(&p, "y", "w", WeightKind::Weight);
        spec.y_covariates = vec!["x".into()];
        let ds = load_dataset(&spec).unwrap();
        assert_eq!(ds.observations.len(), 2);
        assert_eq!(ds.dropped_missing, 2);
        assert_eq!(ds.dropped_weight, 2);
    }

    #[test]
    fn unknown_column_and_empty_result_are_errors() {
        let (_d, p) = write_tmp("y,w\n1,0\n");
        let spec = DatasetSpec::new(&p, "y", "w", WeightKind::Weight);
        assert!(matches!(load_dataset(&spec), Err(Error::Dataset(_))));
        let spec = DatasetSpec::new(&p, "y", "weight", WeightKind::Weight);
        assert!(matches!(load_dataset(&spec), Err(Error::Dataset(_))));
    }

    #[test]
    fn log_transform_only_when_configured() {
        let (_d, p) = write_tmp("y,w\n100,1\n10,1\n");
        let mut spec = DatasetSpec::new(&p, "y", "w", WeightKind::Weight);
        assert_eq!(load_dataset(&spec).unwrap().observations[0].y, 100.0);
        spec.log_columns = vec!["y".into()];
        assert_eq!(load_dataset(&spec).unwrap().observations[1].y, 10f64.ln());
    }
}
