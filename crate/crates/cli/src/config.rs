//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use lcc_core::models::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::split::SplitFractions;
use crate::synthetic::SyntheticSpec;

/// Either three pre-split CSV files, one CSV file to split, or a synthetic
/// spec. A synthetic spec is used when no path is given.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub dataset: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub split: SplitFractions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub similarity_thresholds: Vec<f64>,
    pub confusion_thresholds: Vec<f64>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            similarity_thresholds: vec![0.5, 0.7, 0.9, 1.0],
            confusion_thresholds: vec![0.0, 0.02, 0.05, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Drives data generation, splitting and model initialization.
    pub seed: u64,
    pub data: DataConfig,
    /// The global model.
    pub model: ModelConfig,
    /// Local binary models; defaults to the global model's settings.
    pub local_model: Option<ModelConfig>,
    /// Warm-start logistic local models from the global weights.
    pub warm_start: bool,
    pub selection: SelectionConfig,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.split.validate()?;
        let thresholds = self
            .selection
            .similarity_thresholds
            .iter()
            .chain(&self.selection.confusion_thresholds);
        if let Some(t) = thresholds.into_iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(CliError::Config(format!("threshold {t} outside [0, 1]")));
        }
        let split_paths = [&self.data.train, &self.data.validation, &self.data.test];
        let given = split_paths.iter().filter(|p| p.is_some()).count();
        if given != 0 && given != 3 {
            return Err(CliError::Config("train, validation and test paths go together".into()));
        }
        if given == 3 && self.data.dataset.is_some() {
            return Err(CliError::Config("give either dataset or train/validation/test".into()));
        }
        for m in std::iter::once(&self.model).chain(&self.local_model) {
            if let ModelConfig::Logistic(c) = m {
                c.validate()?;
            }
        }
        if self.warm_start && !matches!(self.local_model(), ModelConfig::Logistic(_)) {
            return Err(CliError::Config("warm_start needs logistic local models".into()));
        }
        Ok(())
    }

    /// The global model config with the experiment seed applied.
    pub fn global_model(&self) -> ModelConfig {
        seeded(self.model, self.seed)
    }

    pub fn local_model(&self) -> ModelConfig {
        seeded(self.local_model.unwrap_or(self.model), self.seed)
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            seed: self.seed,
            ..self.data.synthetic.clone().unwrap_or_default()
        }
    }
}

fn seeded(model: ModelConfig, seed: u64) -> ModelConfig {
    match model {
        ModelConfig::Logistic(mut c) => {
            c.seed = seed;
            ModelConfig::Logistic(c)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.local_model = Some(ModelConfig::NearestCentroid { temperature: 2.0 });
        cfg.data.synthetic = Some(SyntheticSpec::default());
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file() {
        let cfg = ExperimentConfig::from_toml_str(
            "seed = 3\n[model]\nkind = \"logistic\"\nmax_iterations = 50\n[selection]\nconfusion_thresholds = [0.1]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        match cfg.global_model() {
            ModelConfig::Logistic(c) => {
                assert_eq!(c.max_iterations, 50);
                assert_eq!(c.seed, 3);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.selection.similarity_thresholds.len(), 4);
    }

    #[test]
    fn rejects_bad_thresholds_and_fields() {
        let mut cfg = ExperimentConfig::default();
        cfg.selection.confusion_thresholds = vec![1.5];
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml_str("sed = 1").is_err());
    }
}
