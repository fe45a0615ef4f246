use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{GlcmConfig, LinearConfig, LpqConfig};
use crate::error::{Error, Result};
use crate::model::ArchConfig;
use crate::pipeline::UnfoldConfig;

use super::split::SplitSpec;
use super::synth::SynthConfig;
use super::train::TrainConfig;

/// Preprocessing between the raw bore image and the network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub unfold: UnfoldConfig,
    /// Patch side length; equals the strip height.
    pub window: usize,
    /// Fractional overlap of neighbouring patches.
    pub overlap: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            unfold: UnfoldConfig::default(),
            window: 94,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub lpq: LpqConfig,
    pub glcm: GlcmConfig,
    pub linear: LinearConfig,
}

/// Every tunable of an experiment, one TOML section per concern.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub pipeline: PipelineConfig,
    pub synth: SynthConfig,
    pub split: SplitSpec,
    pub baseline: BaselineConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    /// Applies `section.key=value` overrides. Values are parsed as TOML
    /// literals, falling back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let value = parse_literal(raw.trim());
            let mut node = &mut root;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = node
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("`{key}` does not name a setting")))?;
                if i + 1 == parts.len() {
                    if !table.contains_key(*part) && !is_optional_key(part) {
                        return Err(Error::Config(format!("unknown setting `{key}`")));
                    }
                    table.insert((*part).to_string(), value.clone());
                    break;
                }
                node = table
                    .get_mut(*part)
                    .ok_or_else(|| Error::Config(format!("unknown setting `{key}`")))?;
            }
        }
        root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Sets every seed (synthesis, split, training) to `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synth.seed = seed;
        self.split.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.geometry()?;
        self.train.validate()?;
        self.split.validate()?;
        self.synth.validate()?;
        self.baseline.lpq.validate()?;
        self.baseline.glcm.validate()?;
        Ok(())
    }
}

/// Keys that are absent from the serialized form when unset.
fn is_optional_key(key: &str) -> bool {
    matches!(key, "center_x" | "center_y" | "r_min" | "r_max")
}

fn parse_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string();
        for section in ["[arch]", "[train]", "[pipeline]", "[synth]", "[split]"] {
            assert!(text.contains(section), "missing {section}");
        }
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml_str("[train]\nmax_epochs = 7\n").unwrap();
        assert_eq!(cfg.train.max_epochs, 7);
        assert_eq!(cfg.arch, ArchConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("[train]\nmax_epoch = 7\n").is_err());
        assert!(ExperimentConfig::default()
            .with_overrides(&["train.nope=1"])
            .is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&[
                "train.max_epochs=3",
                "train.optimizer.learning_rate=0.01",
                "split.mode=crossvalidation",
                "pipeline.unfold.r_max=100.0",
                "arch.conv1_pooling=max",
            ])
            .unwrap();
        assert_eq!(cfg.train.max_epochs, 3);
        assert_eq!(cfg.train.optimizer.learning_rate, 0.01);
        assert_eq!(cfg.split.mode, super::super::split::SplitMode::CrossValidation);
        assert_eq!(cfg.pipeline.unfold.r_max, Some(100.0));
    }

    #[test]
    fn global_seed() {
        let cfg = ExperimentConfig::default().with_seed(42);
        assert_eq!((cfg.synth.seed, cfg.split.seed, cfg.train.seed), (42, 42, 42));
    }
}
