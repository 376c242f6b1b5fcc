//! Versioned JSON run configuration.
//!
//! Seeds left out of a section are filled from `master_seed` during
//! normalization, so a normalized config carries every seed explicitly.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{HistoryCondition, SliceGrid};
use crate::error::{Error, Result};
use crate::inference::FitConfig;
use crate::sim::SimConfig;

pub const RUN_CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub split_seed: Option<u64>,
    /// Fitting seeds; each model is refit once per seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub split: Option<usize>,
    #[serde(default)]
    pub horizon: Option<usize>,
}

fn default_folds() -> usize {
    5
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            folds: default_folds(),
            split_seed: None,
            seeds: Vec::new(),
            split: None,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<SliceGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<HistoryCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSettings>,
}

impl RunConfig {
    pub fn new(master_seed: u64) -> Self {
        RunConfig {
            version: RUN_CONFIG_VERSION,
            master_seed,
            output_dir: None,
            simulate: None,
            fit: None,
            slices: None,
            history: None,
            eval: None,
        }
    }

    /// Strict parse followed by normalization. `seed` replaces `master_seed`
    /// before missing seeds are filled in.
    pub fn parse(text: &str, seed: Option<u64>) -> Result<Self> {
        // The typed pass reports unknown keys and type errors with line numbers.
        let typed: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if typed.version != RUN_CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {RUN_CONFIG_VERSION})",
                typed.version
            )));
        }
        let mut value: Value = serde_json::from_str(text)?;
        let master = seed.unwrap_or(typed.master_seed);
        value["master_seed"] = master.into();
        for (section, key) in [("simulate", "master_seed"), ("fit", "seed"), ("slices", "seed"), ("history", "seed")] {
            if let Some(Value::Object(map)) = value.get_mut(section) {
                map.entry(key).or_insert(master.into());
            }
        }
        if let Some(Value::Object(map)) = value.get_mut("eval") {
            map.entry("split_seed").or_insert(master.into());
            let empty = map.get("seeds").and_then(Value::as_array).is_none_or(|a| a.is_empty());
            if empty {
                map.insert("seeds".into(), vec![master].into());
            }
        }
        let config: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, seed).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.simulate {
            s.validate()?;
        }
        if let Some(f) = &self.fit {
            f.validate()?;
        }
        if let Some(g) = &self.slices {
            g.validate()?;
        }
        if let Some(e) = &self.eval {
            if e.folds < 2 {
                return Err(Error::Config(format!("eval.folds must be at least 2, got {}", e.folds)));
            }
        }
        Ok(())
    }
}
