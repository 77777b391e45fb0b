//! The TOML run description.
//!
//! ```toml
//! horizon = 2000
//! seed = 7
//!
//! [environment]
//! preset = "linear_ball"
//! dim = 2
//! noise_std = 0.05
//! ```

use std::path::{Path, PathBuf};

use safelearn_core::config::AnalysisSpec;
use safelearn_core::{
    ConstraintSpec, EnvironmentSpec, ExperimentConfig, InitialSafeSet, LossSpec, MappingKind,
    OracleSpec, RunMode,
};
use serde::{Deserialize, Serialize};

use crate::{io_err, HarnessError, Result};

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub horizon: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub mapping: MappingKind,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    pub environment: EnvironmentSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either a preset with optional overrides, or a full explicit spec.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub preset: Option<String>,
    /// Used only with a preset.
    pub dim: Option<usize>,
    pub constraint: Option<ConstraintSpec>,
    pub loss: Option<LossSpec>,
    pub noise_std: Option<f64>,
    pub initial_safe_set: Option<InitialSafeSet>,
    pub action_radius: Option<f64>,
    pub loss_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
        }
    }
}

impl EnvironmentSection {
    pub fn resolve(&self) -> Result<EnvironmentSpec> {
        let mut env = match &self.preset {
            Some(name) => EnvironmentSpec::preset(name, self.dim.unwrap_or(2))?,
            None => {
                let missing = |what: &str| {
                    HarnessError::Config(format!("environment.{what} is required without a preset"))
                };
                EnvironmentSpec {
                    constraint: self
                        .constraint
                        .clone()
                        .ok_or_else(|| missing("constraint"))?,
                    loss: self.loss.clone().ok_or_else(|| missing("loss"))?,
                    noise_std: 0.1,
                    initial_safe_set: self
                        .initial_safe_set
                        .clone()
                        .ok_or_else(|| missing("initial_safe_set"))?,
                    action_radius: 1.0,
                    loss_bound: 1.0,
                }
            }
        };
        if self.preset.is_some() {
            if let Some(c) = &self.constraint {
                env.constraint = c.clone();
            }
            if let Some(l) = &self.loss {
                env.loss = l.clone();
            }
            if let Some(s) = &self.initial_safe_set {
                env.initial_safe_set = s.clone();
            }
        }
        if let Some(x) = self.noise_std {
            env.noise_std = x;
        }
        if let Some(x) = self.action_radius {
            env.action_radius = x;
        }
        if let Some(x) = self.loss_bound {
            env.loss_bound = x;
        }
        Ok(env)
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    /// The validated engine configuration.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            horizon: self.horizon,
            delta: self.delta,
            seed: self.seed,
            mode: self.mode,
            environment: self.environment.resolve()?,
            oracle: self.oracle.clone(),
            mapping: self.mapping,
            analysis: self.analysis.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
