//! Synthetic environments: the true constraint, the loss adversary, the
//! noisy feedback channel and the initial safe set.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
// Redundant whenever std is linked into the build, required otherwise.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::linalg::{clip_to_ball, dot, norm};
use crate::types::Action;
use crate::{Error, Result};

const NORM_SLACK: f64 = 1e-12;

/// Monotone link with `sigma(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Link {
    Tanh,
    Identity,
}

impl Link {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Link::Tanh => u.tanh(),
            Link::Identity => u,
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Link::Tanh => {
                let c = u.cosh();
                1.0 / (c * c)
            }
            Link::Identity => 1.0,
        }
    }

    /// Minimum and maximum slope over `[-range, range]`, scanned on a grid
    /// of `points` nodes.
    pub fn slope_bounds(self, range: f64, points: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let n = points.max(2);
        for i in 0..n {
            let u = -range + 2.0 * range * i as f64 / (n - 1) as f64;
            let s = self.derivative(u);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(tag = "kind", rename_all = "snake_case")
)]
pub enum ConstraintSpec {
    /// `f*(a) = normal . a - offset`
    Linear { normal: Vec<f64>, offset: f64 },
    /// `f*(a) = link(normal . a - offset)`
    Glm {
        normal: Vec<f64>,
        offset: f64,
        link: Link,
    },
    /// `f*(a) = max_i rows[i] . a - offset`, with one feedback entry per row.
    Polytopic { rows: Vec<Vec<f64>>, offset: f64 },
    /// `f*(k) = table[truth][k]`; the table is also the model class.
    Finite { table: Vec<Vec<f64>>, truth: usize },
}

impl ConstraintSpec {
    /// Action dimension `d`, or arm count `K` for finite tables.
    pub fn dim(&self) -> usize {
        match self {
            ConstraintSpec::Linear { normal, .. } | ConstraintSpec::Glm { normal, .. } => {
                normal.len()
            }
            ConstraintSpec::Polytopic { rows, .. } => rows.first().map_or(0, Vec::len),
            ConstraintSpec::Finite { table, .. } => table.first().map_or(0, Vec::len),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ConstraintSpec::Finite { .. })
    }

    pub fn offset(&self) -> f64 {
        match self {
            ConstraintSpec::Linear { offset, .. }
            | ConstraintSpec::Glm { offset, .. }
            | ConstraintSpec::Polytopic { offset, .. } => *offset,
            ConstraintSpec::Finite { .. } => 0.0,
        }
    }

    /// Number of feedback coordinates per round.
    pub fn rows(&self) -> usize {
        match self {
            ConstraintSpec::Polytopic { rows, .. } => rows.len(),
            _ => 1,
        }
    }

    /// Per-row true constraint values. The constraint value is their maximum.
    pub fn row_values(&self, action: &Action) -> Vec<f64> {
        match (self, action) {
            (ConstraintSpec::Linear { normal, offset }, Action::Point(a)) => {
                vec![dot(normal, a) - offset]
            }
            (
                ConstraintSpec::Glm {
                    normal,
                    offset,
                    link,
                },
                Action::Point(a),
            ) => vec![link.eval(dot(normal, a) - offset)],
            (ConstraintSpec::Polytopic { rows, offset }, Action::Point(a)) => {
                rows.iter().map(|r| dot(r, a) - offset).collect()
            }
            (ConstraintSpec::Finite { table, truth }, Action::Index(k)) => {
                vec![table[*truth][*k]]
            }
            _ => panic!("action kind does not match the constraint"),
        }
    }

    /// True constraint value `f*(a)`. Environment-side only.
    pub fn constraint_eval(&self, action: &Action) -> f64 {
        self.row_values(action)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(tag = "kind", rename_all = "snake_case")
)]
pub enum LossSpec {
    /// Linear loss vector (continuous) or per-arm losses (finite), every round.
    Fixed { vector: Vec<f64> },
    /// `mean + spread * U[-1,1]` per coordinate, then clipped to the loss range.
    Iid { mean: Vec<f64>, spread: f64 },
    /// Puts loss on whatever the learner has played most so far.
    Switching,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(Serialize, Deserialize),
    serde(tag = "kind", rename_all = "snake_case")
)]
pub enum InitialSafeSet {
    Ball { radius: f64 },
    Explicit { actions: Vec<Action> },
    Origin,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EnvironmentSpec {
    pub constraint: ConstraintSpec,
    pub loss: LossSpec,
    pub noise_std: f64,
    pub initial_safe_set: InitialSafeSet,
    /// `D_a`: radius of the action ball (continuous path).
    pub action_radius: f64,
    /// `D_l`: bound on the loss vector norm (continuous path).
    pub loss_bound: f64,
}

pub const PRESETS: [&str; 5] = [
    "linear_ball",
    "glm_tanh",
    "polytopic_m3",
    "finite_k10",
    "stuck_origin",
];

/// The finite preset's constraint table: five candidate functions over ten
/// arms, separated by 0.2 on arm 0, which every candidate deems safe.
pub fn finite_k10_table() -> Vec<Vec<f64>> {
    vec![
        vec![-0.1, -0.5, 0.4, -0.3, 0.6, -0.2, 0.5, -0.4, 0.3, 0.7],
        vec![-0.3, -0.5, -0.4, 0.5, -0.3, 0.6, -0.2, 0.4, 0.2, -0.1],
        vec![-0.5, -0.5, -0.2, -0.6, 0.3, -0.3, 0.4, -0.2, 0.6, 0.5],
        vec![-0.7, -0.5, 0.3, -0.2, -0.5, 0.4, -0.6, 0.5, -0.3, 0.2],
        vec![-0.9, -0.5, -0.6, 0.2, 0.4, -0.4, 0.3, 0.6, -0.5, -0.3],
    ]
}

fn unit_normal(dim: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|i| 0.5f64.powi(i as i32)).collect();
    let n = norm(&raw);
    raw.iter().map(|x| x / n).collect()
}

fn pushing_mean(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    m[0] = -0.8;
    m
}

impl EnvironmentSpec {
    /// Named preset. `dim` is ignored by `finite_k10`.
    pub fn preset(name: &str, dim: usize) -> Result<Self> {
        if dim == 0 && name != "finite_k10" {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let offset = 0.5;
        let iid = LossSpec::Iid {
            mean: if dim > 0 {
                pushing_mean(dim)
            } else {
                Vec::new()
            },
            spread: 0.2,
        };
        let spec = match name {
            "linear_ball" => Self {
                constraint: ConstraintSpec::Linear {
                    normal: unit_normal(dim),
                    offset,
                },
                loss: iid,
                noise_std: 0.1,
                initial_safe_set: InitialSafeSet::Ball { radius: offset },
                action_radius: 1.0,
                loss_bound: 1.0,
            },
            "glm_tanh" => Self {
                constraint: ConstraintSpec::Glm {
                    normal: unit_normal(dim),
                    offset,
                    link: Link::Tanh,
                },
                loss: iid,
                noise_std: 0.1,
                initial_safe_set: InitialSafeSet::Ball { radius: offset },
                action_radius: 1.0,
                loss_bound: 1.0,
            },
            "polytopic_m3" => {
                if dim < 2 {
                    return Err(Error::InvalidConfig(
                        "polytopic_m3 needs dimension >= 2".into(),
                    ));
                }
                let rows = (0..3)
                    .map(|i| {
                        let th = 2.0 * core::f64::consts::PI * i as f64 / 3.0;
                        let mut r = vec![0.0; dim];
                        r[0] = th.cos();
                        r[1] = th.sin();
                        r
                    })
                    .collect();
                Self {
                    constraint: ConstraintSpec::Polytopic { rows, offset },
                    loss: iid,
                    noise_std: 0.1,
                    initial_safe_set: InitialSafeSet::Ball { radius: offset },
                    action_radius: 1.0,
                    loss_bound: 1.0,
                }
            }
            "finite_k10" => Self {
                constraint: ConstraintSpec::Finite {
                    table: finite_k10_table(),
                    truth: 2,
                },
                loss: LossSpec::Iid {
                    mean: vec![0.9, 0.85, 0.5, 0.45, 0.3, 0.35, 0.1, 0.4, 0.05, 0.6],
                    spread: 0.1,
                },
                noise_std: 0.1,
                initial_safe_set: InitialSafeSet::Explicit {
                    actions: vec![Action::Index(0), Action::Index(1)],
                },
                action_radius: 1.0,
                loss_bound: 1.0,
            },
            "stuck_origin" => {
                let mut vector = vec![0.0; dim];
                vector[0] = -0.8;
                Self {
                    constraint: ConstraintSpec::Linear {
                        normal: unit_normal(dim),
                        offset: 0.0,
                    },
                    loss: LossSpec::Fixed { vector },
                    noise_std: 0.1,
                    initial_safe_set: InitialSafeSet::Origin,
                    action_radius: 1.0,
                    loss_bound: 1.0,
                }
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown environment preset `{other}`"
                )))
            }
        };
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.constraint.dim()
    }

    pub fn constraint_eval(&self, action: &Action) -> f64 {
        self.constraint.constraint_eval(action)
    }

    /// `f*(a) + xi`, one entry per constraint row. Continuous rows report the
    /// linear part minus the offset; the GLM row reports the post-link value.
    pub fn feedback_draw<R: Rng + ?Sized>(&self, action: &Action, rng: &mut R) -> Vec<f64> {
        let mut z = self.constraint.row_values(action);
        for v in &mut z {
            let xi: f64 = rng.sample(StandardNormal);
            *v += self.noise_std * xi;
        }
        z
    }

    /// Model class restricted by the initial safe set, as indices into the
    /// finite table. Empty for continuous constraints.
    pub fn initial_class(&self) -> Vec<usize> {
        match &self.constraint {
            ConstraintSpec::Finite { table, .. } => {
                let safe = self.initial_indices();
                (0..table.len())
                    .filter(|&j| safe.iter().all(|&k| table[j][k] <= 0.0))
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// Arms of an explicit initial safe set; empty for other kinds.
    pub fn initial_indices(&self) -> Vec<usize> {
        match &self.initial_safe_set {
            InitialSafeSet::Explicit { actions } => {
                actions.iter().filter_map(Action::as_index).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Checks the structural invariants, including that every initial safe
    /// action is safe under every member of the initial class.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be finite and nonnegative");
        }
        let dim = self.dim();
        if dim == 0 {
            return bad("constraint has zero dimension");
        }
        match &self.constraint {
            ConstraintSpec::Finite { table, truth } => {
                if table.iter().any(|row| row.len() != dim) {
                    return bad("finite table rows must have equal length");
                }
                if *truth >= table.len() {
                    return bad("truth index outside the table");
                }
                let safe = self.initial_indices();
                if safe.is_empty() {
                    return bad("finite path needs an explicit nonempty initial safe set");
                }
                if safe.iter().any(|&k| k >= dim) {
                    return bad("initial safe action outside [K]");
                }
                if !self.initial_class().contains(truth) {
                    return bad("initial safe set is unsafe under the true constraint");
                }
            }
            other => {
                if !(self.action_radius > 0.0 && self.loss_bound > 0.0) {
                    return bad("action_radius and loss_bound must be positive");
                }
                let offset = other.offset();
                if !(offset >= 0.0 && offset.is_finite()) {
                    return bad("offset must be finite and nonnegative");
                }
                let rows: Vec<&Vec<f64>> = match other {
                    ConstraintSpec::Linear { normal, .. } | ConstraintSpec::Glm { normal, .. } => {
                        vec![normal]
                    }
                    ConstraintSpec::Polytopic { rows, .. } => rows.iter().collect(),
                    ConstraintSpec::Finite { .. } => unreachable!(),
                };
                if rows.is_empty() || rows.iter().any(|r| r.len() != dim) {
                    return bad("constraint rows must share the action dimension");
                }
                if rows.iter().any(|r| norm(r) > 1.0 + NORM_SLACK) {
                    return bad("constraint rows must have norm at most 1");
                }
                // F0 is the unit ball; a point is safe for all of it iff its norm is at most b.
                let ok = match &self.initial_safe_set {
                    InitialSafeSet::Ball { radius } => {
                        *radius >= 0.0 && *radius <= offset + NORM_SLACK
                    }
                    InitialSafeSet::Origin => true,
                    InitialSafeSet::Explicit { actions } => actions.iter().all(|a| {
                        a.as_point()
                            .is_some_and(|p| p.len() == dim && norm(p) <= offset + NORM_SLACK)
                    }),
                };
                if !ok {
                    return bad("initial safe set is not safe for every unit-norm constraint");
                }
            }
        }
        match &self.loss {
            LossSpec::Fixed { vector } => {
                if vector.len() != dim {
                    return bad("loss vector dimension mismatch");
                }
                if self.constraint.is_finite() {
                    if vector.iter().any(|v| !(0.0..=1.0).contains(v)) {
                        return bad("finite losses must lie in [0, 1]");
                    }
                } else if norm(vector) > self.loss_bound + NORM_SLACK {
                    return bad("loss vector exceeds loss_bound");
                }
            }
            LossSpec::Iid { mean, spread } => {
                #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
                if mean.len() != dim || !(*spread >= 0.0) {
                    return bad("iid loss needs a mean of the right dimension and spread >= 0");
                }
            }
            LossSpec::Switching => {}
        }
        Ok(())
    }
}

/// Stateful loss adversary. Sees only the actions the learner played.
#[derive(Debug, Clone)]
pub struct LossAdversary {
    spec: LossSpec,
    finite: bool,
    dim: usize,
    bound: f64,
    play_sum: Vec<f64>,
    play_counts: Vec<usize>,
    round: usize,
}

impl LossAdversary {
    pub fn new(env: &EnvironmentSpec) -> Self {
        let dim = env.dim();
        let finite = env.constraint.is_finite();
        Self {
            spec: env.loss.clone(),
            finite,
            dim,
            bound: if finite { 1.0 } else { env.loss_bound },
            play_sum: vec![0.0; if finite { 0 } else { dim }],
            play_counts: vec![0; if finite { dim } else { 0 }],
            round: 0,
        }
    }

    /// Loss descriptor for the next round.
    pub fn loss_next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        self.round += 1;
        match &self.spec {
            LossSpec::Fixed { vector } => vector.clone(),
            LossSpec::Iid { mean, spread } => {
                let raw: Vec<f64> = mean
                    .iter()
                    .map(|m| m + spread * rng.random_range(-1.0..=1.0))
                    .collect();
                if self.finite {
                    raw.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
                } else {
                    clip_to_ball(&raw, self.bound)
                }
            }
            LossSpec::Switching => {
                if self.finite {
                    let mut best = 0;
                    for (k, &c) in self.play_counts.iter().enumerate() {
                        if c > self.play_counts[best] {
                            best = k;
                        }
                    }
                    let mut l = vec![0.0; self.dim];
                    l[best] = 1.0;
                    l
                } else {
                    let n = norm(&self.play_sum);
                    if n > 1e-12 {
                        self.play_sum.iter().map(|x| self.bound * x / n).collect()
                    } else {
                        let mut l = vec![0.0; self.dim];
                        l[0] = if self.round.is_multiple_of(2) {
                            self.bound
                        } else {
                            -self.bound
                        };
                        l
                    }
                }
            }
        }
    }

    pub fn observe_play(&mut self, action: &Action) {
        match action {
            Action::Point(a) => {
                for (s, x) in self.play_sum.iter_mut().zip(a) {
                    *s += x;
                }
            }
            Action::Index(k) => self.play_counts[*k] += 1,
        }
    }
}

/// Loss of an action under a descriptor.
pub fn loss_value(descriptor: &[f64], action: &Action) -> f64 {
    match action {
        Action::Point(a) => dot(descriptor, a),
        Action::Index(k) => descriptor[*k],
    }
}
