//! Per-round trace records and the run ledger.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// A point of the decision space: a coordinate vector on the continuous path
/// or an arm index on the finite path.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(untagged))]
pub enum Action {
    Point(Vec<f64>),
    Index(usize),
}

impl Action {
    pub fn as_point(&self) -> Option<&[f64]> {
        match self {
            Action::Point(p) => Some(p),
            Action::Index(_) => None,
        }
    }

    pub fn as_index(&self) -> Option<usize> {
        match self {
            Action::Index(k) => Some(*k),
            Action::Point(_) => None,
        }
    }
}

/// The learning oracle's recommendation before the mapping is applied.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DistributionSummary {
    pub support: Vec<Action>,
    pub probabilities: Vec<f64>,
}

impl DistributionSummary {
    pub fn total_mass(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum MappingId {
    Scaling,
    ExploreExploit,
    Saddle,
    Identity,
    PessimisticGreedy,
}

/// What the environment reveals after an action is played.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub loss_value: f64,
    /// Linear loss vector on the continuous path, per-arm losses on the
    /// finite path.
    pub loss_descriptor: Vec<f64>,
    pub constraint_value: f64,
    /// One entry per constraint row.
    pub feedback: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RoundRecord {
    /// One-based round index.
    pub t: usize,
    pub action: Action,
    pub recommended_distribution_summary: DistributionSummary,
    /// Sample drawn from the recommendation before mapping (continuous path).
    pub pre_map_action: Option<Action>,
    pub mapping_id: MappingId,
    /// Selected scale for the saddle mapping when chosen by the bandit.
    pub kappa: Option<f64>,
    pub gamma: f64,
    pub width_at_action: f64,
    /// Width at the pre-map sample.
    pub width_pre_map: Option<f64>,
    /// Regression prediction, in constraint units (offset already removed).
    pub prediction: f64,
    pub constraint_value: f64,
    pub feedback: Vec<f64>,
    pub loss_value: f64,
    pub violated: bool,
    /// `<loss, p - p~>`: expected loss paid for moving into the pessimistic set.
    pub expected_loss_gap: f64,
    /// Expected width under the played distribution.
    pub expected_width: f64,
    pub truth_in_version_space: bool,
    pub optimistic_size: Option<usize>,
    pub pessimistic_size: Option<usize>,
    pub survivors: Option<usize>,
    pub pool_size: Option<usize>,
    pub projection_converged: bool,
    pub cumulative_regret_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RegretLedger {
    pub learner_cum_loss: f64,
    pub hindsight_safe_opt_loss: Option<f64>,
    pub hindsight_action: Option<Action>,
    pub regret: f64,
    pub violations: usize,
    pub violation_magnitude_sum: f64,
    /// Signed sum of constraint values, for the long-term variant.
    pub constraint_sum: f64,
    pub width_sum: f64,
    /// Keyed by the exponent `i` of the grid value `2^-i`.
    pub width_exceed_counts: BTreeMap<u32, usize>,
    /// Multiply raw losses by this to land in a unit range.
    pub loss_scale: f64,
    pub radius: f64,
    /// Whether the true constraint stayed inside the version space on every round.
    pub truth_always_covered: bool,
    pub horizon: usize,
}

impl RegretLedger {
    pub fn normalized_regret(&self) -> f64 {
        self.regret * self.loss_scale
    }
}

/// The dyadic grid `2^0, 2^-1, ..., 2^-10` used for width thresholds and
/// for the free parameter of the width-sum bound.
pub fn dyadic_grid() -> impl Iterator<Item = (u32, f64)> {
    (0u32..=10).map(|i| (i, 1.0 / (1u64 << i) as f64))
}
