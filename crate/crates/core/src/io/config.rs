use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::DatasetSpec;
use crate::designs::ScenarioConfig;
use crate::error::{Error, Result};
use crate::harness::WeightDistConfig;
use crate::model::{Method, ModelKind};
use crate::sampler::ChainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SimulateStudy,
    Fit,
    WeightsDist,
    EmitPlotData,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::SimulateStudy => "simulate-study",
            Command::Fit => "fit",
            Command::WeightsDist => "weights-dist",
            Command::EmitPlotData => "emit-plot-data",
        }
    }
}

fn one() -> usize {
    1
}

fn default_method() -> Method {
    Method::Full
}

fn default_model() -> ModelKind {
    ModelKind::Linear
}

/// Everything one CLI invocation needs; mirrors the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_dist: Option<WeightDistConfig>,
    /// Directory of a previous run, for `emit-plot-data`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_dir: Option<PathBuf>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub chain: ChainConfig,
    /// Independent chains for `fit`; more than one enables split R-hat.
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "current_dir")]
    pub output_dir: PathBuf,
}

fn current_dir() -> PathBuf {
    PathBuf::from(".")
}

impl RunConfig {
    pub fn new(command: Command, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            scenario: None,
            dataset: None,
            weights_dist: None,
            run_dir: None,
            method: Method::Full,
            model: ModelKind::Linear,
            chain: ChainConfig::default(),
            chains: 1,
            threads: None,
            output_dir: output_dir.into(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks that exactly the sections the command needs are present.
    pub fn validate(&self) -> Result<()> {
        let present = [
            ("scenario", self.scenario.is_some()),
            ("dataset", self.dataset.is_some()),
            ("weights_dist", self.weights_dist.is_some()),
            ("run_dir", self.run_dir.is_some()),
        ];
        let needed = match self.command {
            Command::SimulateStudy => "scenario",
            Command::Fit => "dataset",
            Command::WeightsDist => "weights_dist",
            Command::EmitPlotData => "run_dir",
        };
        for (name, has) in present {
            if name == needed && !has {
                return Err(Error::Config(format!("`{}` needs a `{name}` section", self.command.as_str())));
            }
            if name != needed && has {
                return Err(Error::Config(format!(
                    "`{name}` does not apply to `{}`",
                    self.command.as_str()
                )));
            }
        }
        if self.command != Command::EmitPlotData {
            self.chain.validate()?;
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be at least 1".into()));
        }
        if self.command == Command::Fit && self.model == ModelKind::WeightsOnly {
            return Err(Error::Config("use `weights-dist` for the weights-only model".into()));
        }
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"command":"simulate-study","output_dir":"out",
                "scenario":{"kind":"slr_skewed","N":1000,"n":50,"b_pi":2,"M":2,"base_seed":3},
                "chain":{"n_warmup":200,"n_draws":200,"target_accept":0.8,"max_leapfrog":1024,"seed":0,"init_jitter":1.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.command, Command::SimulateStudy);
        assert_eq!(cfg.method, Method::Full);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_sections_for_other_commands() {
        let mut cfg = RunConfig::new(Command::Fit, "out");
        assert!(cfg.validate().is_err());
        cfg.dataset = Some(DatasetSpec::new("d.csv", "y", "w", super::super::WeightKind::Weight));
        cfg.validate().unwrap();
        cfg.weights_dist = Some(WeightDistConfig::new(100, 10, 1));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let r: std::result::Result<RunConfig, _> =
            serde_json::from_str(r#"{"command":"fit","output_dir":"o","bogus":1}"#);
        assert!(r.is_err());
    }
}
