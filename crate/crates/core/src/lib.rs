//! Safe online learning under an unknown constraint.
//!
//! The learner picks actions round by round while an unknown constraint
//! `f*(a) <= 0` must hold on every round with high probability. An online
//! regression oracle estimates the constraint; its predictions define a
//! version space of plausible constraint functions, which in turn yields an
//! optimistic set (actions some surviving model deems safe) and a
//! pessimistic set (actions every surviving model deems safe). An online
//! learning oracle plays over the optimistic set, and a mapping moves its
//! recommendation into the pessimistic set before the action is played.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI, and the
//! multi-run harness live in the companion `safelearn` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod config;
pub mod engine;
pub mod environment;
mod error;
pub mod hindsight;
pub mod learning;
pub mod linalg;
pub mod mapping;
pub mod regression;
pub mod types;
pub mod version_space;

pub use config::{ExperimentConfig, MappingKind, OracleSpec, RunMode};
pub use engine::{run_long_term, run_safe_learning, run_with_observer, RoundView, RunOutput};
pub use environment::{ConstraintSpec, EnvironmentSpec, InitialSafeSet, Link, LossSpec};
pub use error::{Error, Result};
pub use types::{Action, DistributionSummary, MappingId, RegretLedger, RoundOutcome, RoundRecord};
