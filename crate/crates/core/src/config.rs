//! Declarative run configuration.

use alloc::format;
// Redundant whenever std is linked into the build, required otherwise.
#[allow(unused_imports)]
use num_traits::Float;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum RunMode {
    /// Per-round safety: play inside the pessimistic set.
    #[default]
    Safe,
    /// Play the optimistic recommendation directly and only track the
    /// cumulative constraint value.
    LongTerm,
    /// Baseline: follow the leader over the pessimistic set, no exploration.
    PessimisticGreedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum MappingKind {
    /// Scaling on the continuous path, explore-exploit on the finite path.
    #[default]
    Auto,
    Scaling,
    ExploreExploit,
    /// Bandit over saddle-point mappings with `kappa = 2^i` (finite path).
    SaddleExp3,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct OracleSpec {
    /// Ridge parameter of the regression oracle.
    pub lambda: f64,
    /// Multiplier `c_cal` on the version-space radius.
    pub radius_scale: f64,
    /// Lattice points per axis for the hull candidate pool.
    pub lattice_resolution: usize,
    /// Boundary directions traced per round; `None` picks a default by dimension.
    pub ray_directions: Option<usize>,
    /// Bound `D_f` on the norm of the loss gradient.
    pub gradient_bound: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            radius_scale: 0.25,
            lattice_resolution: 17,
            ray_directions: None,
            gradient_bound: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct AnalysisSpec {
    /// Constant in front of the linear-class eluder dimension.
    pub c_eluder: f64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self { c_eluder: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ExperimentConfig {
    pub horizon: usize,
    pub delta: f64,
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mode: RunMode,
    pub environment: EnvironmentSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub oracle: OracleSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mapping: MappingKind,
    #[cfg_attr(feature = "serde", serde(default))]
    pub analysis: AnalysisSpec,
}

impl ExperimentConfig {
    pub fn new(environment: EnvironmentSpec, horizon: usize, delta: f64, seed: u64) -> Self {
        Self {
            horizon,
            delta,
            seed,
            mode: RunMode::Safe,
            environment,
            oracle: OracleSpec::default(),
            mapping: MappingKind::Auto,
            analysis: AnalysisSpec::default(),
        }
    }

    pub fn from_preset(name: &str, dim: usize, horizon: usize, seed: u64) -> Result<Self> {
        Ok(Self::new(
            EnvironmentSpec::preset(name, dim)?,
            horizon,
            0.05,
            seed,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        let o = &self.oracle;
        if !(o.lambda > 0.0 && o.radius_scale > 0.0 && o.gradient_bound > 0.0) {
            return Err(Error::InvalidConfig(
                "lambda, radius_scale and gradient_bound must be positive".into(),
            ));
        }
        if o.lattice_resolution < 2 {
            return Err(Error::InvalidConfig(
                "lattice_resolution must be at least 2 per axis".into(),
            ));
        }
        let finite = self.environment.constraint.is_finite();
        let ok = match self.mapping {
            MappingKind::Auto | MappingKind::Identity => true,
            MappingKind::Scaling => !finite,
            MappingKind::ExploreExploit | MappingKind::SaddleExp3 => finite,
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "mapping {:?} does not apply to this action space",
                self.mapping
            )));
        }
        self.environment.validate()
    }

    /// Version-space radius `beta`.
    ///
    /// Continuous classes use `c_cal * (d ln(1 + T D_a^2 / d) + ln(1/delta))`;
    /// finite classes use `c_cal * 4 (ln |F0| + ln(1/delta))`.
    pub fn radius(&self) -> f64 {
        let t = self.horizon as f64;
        let log_delta = (1.0 / self.delta).ln();
        let c = self.oracle.radius_scale;
        let env = &self.environment;
        if env.constraint.is_finite() {
            let n = env.initial_class().len().max(1) as f64;
            c * 4.0 * (n.ln() + log_delta)
        } else {
            let d = env.dim() as f64;
            let da = env.action_radius;
            c * (d * (1.0 + t * da * da / d).ln() + log_delta)
        }
    }

    /// Scale that maps raw losses into a unit range.
    pub fn loss_scale(&self) -> f64 {
        let env = &self.environment;
        if env.constraint.is_finite() {
            1.0
        } else {
            1.0 / (2.0 * env.loss_bound * env.action_radius)
        }
    }
}
