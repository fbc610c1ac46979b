//! Experiment configuration: one TOML document with `[environment]`,
//! `[learner]`, and `[run]` sections, dotted-path command-line overrides,
//! and strict unknown-key rejection so typos fail loudly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envsim::EnvConfig;
use crate::error::{Error, Result};
use crate::learner::TrainConfig;

/// Run-level bookkeeping: how long to train and where artifacts go.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Total episodes to train (summed across parallel environments).
    pub episodes: usize,
    /// Master experiment seed; copied into the learner at resolution time.
    pub seed: u64,
    /// Directory for the manifest, metrics, and checkpoints.
    pub out_dir: String,
    /// Episodes between periodic checkpoints.
    pub eval_interval: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            episodes: 504,
            seed: 0,
            out_dir: "maac_run".to_string(),
            eval_interval: 120,
        }
    }
}

/// The full experiment description. `[environment]` is required; the other
/// sections fall back to defaults field by field.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvConfig,
    #[serde(default)]
    pub learner: TrainConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Default experiment for a named task (`ctc`, `rover_tower`, `coop_nav`).
    pub fn default_for_task(task: &str) -> Result<Self> {
        Ok(ExperimentConfig {
            environment: EnvConfig::default_for(task)?,
            learner: TrainConfig::default(),
            run: RunConfig::default(),
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config serialization failed: {e}")))
    }

    /// Applies one `section.key=value` override. The path must name an
    /// existing field; the value is parsed as TOML, falling back to a bare
    /// string.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{spec}' is not of form key=value")))?;
        let path = path.trim();
        let raw = raw.trim();
        let segments: Vec<&str> = path.split('.').collect();
        if path.is_empty() || segments.iter().any(|s| s.is_empty()) {
            return Err(Error::Config(format!("override '{spec}' has an empty path segment")));
        }

        let mut root = toml::Value::try_from(&*self)
            .map_err(|e| Error::Config(format!("config serialization failed: {e}")))?;
        let mut cursor = &mut root;
        for seg in &segments[..segments.len() - 1] {
            cursor = cursor
                .as_table_mut()
                .and_then(|t| t.get_mut(*seg))
                .ok_or_else(|| Error::Config(format!("unknown config path '{path}'")))?;
        }
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{path}' does not name a settable field")))?;
        let leaf = segments[segments.len() - 1];
        if !table.contains_key(leaf) {
            return Err(Error::Config(format!("unknown config key '{path}'")));
        }
        let value = match format!("v = {raw}").parse::<toml::Table>() {
            Ok(t) => t["v"].clone(),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        table.insert(leaf.to_string(), value);
        *self = root
            .try_into()
            .map_err(|e| Error::Config(format!("override '{spec}' rejected: {e}")))?;
        Ok(())
    }

    /// Copies the run seed into the learner and checks every section.
    /// Call after all overrides are in.
    pub fn resolve(&mut self) -> Result<()> {
        self.learner.seed = self.run.seed;
        self.learner.validate()?;
        if self.run.episodes == 0 || self.run.eval_interval == 0 {
            return Err(Error::Config("run.episodes and run.eval_interval must be positive".into()));
        }
        Ok(())
    }

    pub fn task_label(&self) -> &'static str {
        self.environment.task.label()
    }
}
