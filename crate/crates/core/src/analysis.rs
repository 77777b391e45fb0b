//! Checkers that run on finished traces: eluder dimension, violation-count
//! and width-sum bounds, regret certificates, per-round ratio checks.
//!
//! Everything here is a pure function of its inputs.

use alloc::vec;
use alloc::vec::Vec;

// Redundant whenever std is linked into the build, required otherwise.
#[allow(unused_imports)]
use num_traits::Float;

use crate::config::ExperimentConfig;
use crate::environment::ConstraintSpec;
use crate::types::{RegretLedger, RoundRecord};
use crate::{Error, Result};

/// Default node budget for the exhaustive eluder search.
pub const DEFAULT_SEARCH_BUDGET: u64 = 20_000_000;

/// Half-open interval of admissible scales, `lo` included when `closed`.
#[derive(Debug, Clone, Copy)]
struct Span {
    lo: f64,
    closed: bool,
    hi: f64,
}

fn merge(mut spans: Vec<Span>) -> Vec<Span> {
    spans.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(b.closed.cmp(&a.closed)));
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        if let Some(last) = out.last_mut() {
            if s.lo < last.hi || (s.lo == last.hi && s.closed) {
                last.hi = last.hi.max(s.hi);
                continue;
            }
        }
        out.push(s);
    }
    out
}

struct EluderSearch<'a> {
    rows: &'a [&'a [f64]],
    pairs: Vec<(usize, usize)>,
    arms: usize,
    budget: u64,
    nodes: u64,
    best: usize,
    used: Vec<bool>,
}

impl EluderSearch<'_> {
    /// Scales at which `arm` is independent of the current prefix, given the
    /// per-pair squared distances accumulated on that prefix.
    fn admissible(&self, arm: usize, dist: &[f64], current: &[Span]) -> Vec<Span> {
        let mut out = Vec::new();
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let gap = (self.rows[i][arm] - self.rows[j][arm]).abs();
            let s = dist[p].sqrt();
            if s >= gap {
                continue;
            }
            for u in current {
                let (lo, closed) = if s > u.lo {
                    (s, true)
                } else if s < u.lo {
                    (u.lo, u.closed)
                } else {
                    (s, u.closed)
                };
                let hi = u.hi.min(gap);
                if lo < hi {
                    out.push(Span { lo, closed, hi });
                }
            }
        }
        merge(out)
    }

    fn dfs(&mut self, depth: usize, dist: &[f64], current: &[Span]) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::SearchBudgetExceeded {
                budget: self.budget,
                lower_bound: self.best,
            });
        }
        self.best = self.best.max(depth);
        let remaining = self.used.iter().filter(|u| !**u).count();
        if depth + remaining <= self.best {
            return Ok(());
        }
        for arm in 0..self.arms {
            if self.used[arm] {
                continue;
            }
            let next = self.admissible(arm, dist, current);
            if next.is_empty() {
                continue;
            }
            // fresh copy: undoing the sums by subtraction can leave them
            // slightly negative
            let grown: Vec<f64> = self
                .pairs
                .iter()
                .zip(dist)
                .map(|(&(i, j), d)| {
                    let g = self.rows[i][arm] - self.rows[j][arm];
                    d + g * g
                })
                .collect();
            self.used[arm] = true;
            let res = self.dfs(depth + 1, &grown, &next);
            self.used[arm] = false;
            res?;
        }
        Ok(())
    }
}

/// Exact eluder dimension of a finite class at scale `eps`.
///
/// `rows[j][a]` is the value of function `j` at action `a`. The result is
/// the length of the longest sequence of actions, each independent of its
/// predecessors at a common scale `eps' > eps`: some pair of functions is
/// within `eps'` in root-sum-square on the prefix and separated by more than
/// `eps'` on the new action. Repeating an action never helps, so sequences
/// use distinct actions and the search is exhaustive over their orderings.
pub fn eluder_dimension_finite(rows: &[&[f64]], eps: f64, budget: u64) -> Result<usize> {
    let arms = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != arms) {
        return Err(Error::InvalidConfig("ragged function table".into()));
    }
    let mut pairs = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            pairs.push((i, j));
        }
    }
    let mut search = EluderSearch {
        rows,
        pairs,
        arms,
        budget,
        nodes: 0,
        best: 0,
        used: vec![false; arms],
    };
    let dist = vec![0.0; search.pairs.len()];
    let start = [Span {
        lo: eps,
        closed: false,
        hi: f64::INFINITY,
    }];
    search.dfs(0, &dist, &start)?;
    Ok(search.best)
}

/// Selects the class rows out of a full table and runs the exact search.
pub fn eluder_of_class(
    table: &[Vec<f64>],
    class: &[usize],
    eps: f64,
    budget: u64,
) -> Result<usize> {
    let rows: Vec<&[f64]> = class.iter().map(|&j| table[j].as_slice()).collect();
    eluder_dimension_finite(&rows, eps, budget)
}

/// Eluder dimension used for linear classes: `c d ln(1 + 1/eps)`.
pub fn linear_eluder(dim: usize, eps: f64, c_eluder: f64) -> f64 {
    c_eluder * dim as f64 * (1.0 + 1.0 / eps).ln()
}

/// Eluder dimension as a function of scale for a configured class: exact
/// values on the grid for finite classes, the closed form otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum EluderProfile {
    Linear {
        dim: usize,
        c_eluder: f64,
    },
    /// `(scale, value)` sorted by increasing scale.
    Table(Vec<(f64, f64)>),
}

impl EluderProfile {
    /// Polytopic and GLM classes use the linear form in their dimension.
    pub fn for_config(config: &ExperimentConfig, budget: u64) -> Result<Self> {
        let env = &config.environment;
        match &env.constraint {
            ConstraintSpec::Finite { table, .. } => {
                let class = env.initial_class();
                let mut grid = alpha_grid();
                grid.sort_by(f64::total_cmp);
                let mut values = Vec::with_capacity(grid.len());
                for eps in grid {
                    values.push((eps, eluder_of_class(table, &class, eps, budget)? as f64));
                }
                Ok(Self::Table(values))
            }
            _ => Ok(Self::Linear {
                dim: env.dim(),
                c_eluder: config.analysis.c_eluder,
            }),
        }
    }

    /// Off-grid scales take the value at the nearest grid scale below,
    /// which can only overstate it; scales under the grid get the finest
    /// grid value.
    pub fn value(&self, eps: f64) -> f64 {
        match self {
            Self::Linear { dim, c_eluder } => linear_eluder(*dim, eps, *c_eluder),
            Self::Table(values) => values
                .iter()
                .rev()
                .find(|(s, _)| *s <= eps)
                .or(values.first())
                .map_or(0.0, |&(_, v)| v),
        }
    }
}

/// One comparison of an observed quantity with its bound at one scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub scale: f64,
    pub observed: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.observed <= self.bound
    }

    fn into_error(self) -> Error {
        Error::BoundViolated {
            scale: self.scale,
            observed: self.observed,
            bound: self.bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Constant in front of the radius term.
    pub constant: f64,
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(BoundCheck::holds)
    }

    pub fn first_failure(&self) -> Option<BoundCheck> {
        self.checks.iter().copied().find(|c| !c.holds())
    }

    /// Errors with the first failing scale.
    pub fn ensure(self) -> Result<Self> {
        match self.first_failure() {
            Some(c) => Err(c.into_error()),
            None => Ok(self),
        }
    }
}

/// Grid `2^-i` for `i = 0..=10`.
pub fn epsilon_grid() -> Vec<f64> {
    crate::types::dyadic_grid().map(|(_, e)| e).collect()
}

/// Grid for the free parameter of the width-sum bound: `2^1` down to `2^-10`.
pub fn alpha_grid() -> Vec<f64> {
    let mut g = vec![2.0];
    g.extend(epsilon_grid());
    g
}

/// Counts rounds with width above `eps` and compares against
/// `(constant * beta / eps^2 + 1) * E(eps)` for every `eps` in the grid.
pub fn violation_count_report(
    widths: &[f64],
    beta: f64,
    constant: f64,
    grid: &[f64],
    eluder: &dyn Fn(f64) -> f64,
) -> BoundReport {
    let checks = grid
        .iter()
        .map(|&eps| BoundCheck {
            scale: eps,
            observed: widths.iter().filter(|&&w| w > eps).count() as f64,
            bound: (constant * beta / (eps * eps) + 1.0) * eluder(eps),
        })
        .collect();
    BoundReport { constant, checks }
}

pub fn check_violation_count_bound(
    widths: &[f64],
    beta: f64,
    constant: f64,
    grid: &[f64],
    eluder: &dyn Fn(f64) -> f64,
) -> Result<BoundReport> {
    violation_count_report(widths, beta, constant, grid, eluder).ensure()
}

/// `alpha T + 20 beta E(alpha) / alpha`, minimized over the grid.
pub fn width_sum_budget(
    horizon: usize,
    beta: f64,
    grid: &[f64],
    eluder: &dyn Fn(f64) -> f64,
) -> (f64, f64) {
    let t = horizon as f64;
    grid.iter()
        .map(|&a| (a, a * t + 20.0 * beta * eluder(a) / a))
        .fold((f64::NAN, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        })
}

/// Compares `sum_t width_t` with the width-sum budget. The single check
/// carries the minimizing grid value as its scale.
pub fn check_width_sum_bound(
    widths: &[f64],
    beta: f64,
    grid: &[f64],
    eluder: &dyn Fn(f64) -> f64,
) -> Result<BoundCheck> {
    let (alpha, bound) = width_sum_budget(widths.len(), beta, grid, eluder);
    let check = BoundCheck {
        scale: alpha,
        observed: widths.iter().sum(),
        bound,
    };
    if check.holds() {
        Ok(check)
    } else {
        Err(check.into_error())
    }
}

/// Constants that enter the regret certificate, in unit-loss scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretConstants {
    pub kappa: f64,
    pub beta: f64,
    pub delta: f64,
    pub oracle_regret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretCertificate {
    /// Regret after loss normalization.
    pub realized: f64,
    pub exploration: f64,
    pub oracle_regret: f64,
    pub deviation: f64,
    pub bound: f64,
}

impl RegretCertificate {
    pub fn holds(&self) -> bool {
        self.realized <= self.bound
    }
}

/// `kappa * min_alpha {alpha T + 20 beta E(alpha)/alpha} + Reg_OL + sqrt(2 T ln(1/delta))`
/// next to the realized normalized regret.
pub fn certify_regret(
    ledger: &RegretLedger,
    consts: &RegretConstants,
    eluder: &dyn Fn(f64) -> f64,
) -> Result<RegretCertificate> {
    if ledger.hindsight_safe_opt_loss.is_none() {
        return Err(Error::MissingHindsight);
    }
    let t = ledger.horizon as f64;
    let (_, budget) = width_sum_budget(ledger.horizon, consts.beta, &alpha_grid(), eluder);
    let exploration = consts.kappa * budget;
    let deviation = (2.0 * t * (1.0 / consts.delta).ln()).sqrt();
    Ok(RegretCertificate {
        realized: ledger.normalized_regret(),
        exploration,
        oracle_regret: consts.oracle_regret,
        deviation,
        bound: exploration + consts.oracle_regret + deviation,
    })
}

/// Smallest separation of two initial-class members on the initial safe
/// arms: `min_{f != f'} max_{a in A0} |f(a) - f'(a)|`. Infinite for a
/// singleton class.
pub fn finite_separation(table: &[Vec<f64>], class: &[usize], initial: &[usize]) -> f64 {
    let mut sep = f64::INFINITY;
    for (x, &i) in class.iter().enumerate() {
        for &j in &class[x + 1..] {
            let gap = initial
                .iter()
                .map(|&a| (table[i][a] - table[j][a]).abs())
                .fold(0.0, f64::max);
            sep = sep.min(gap);
        }
    }
    sep
}

/// Bound on the per-round ratio of loss gap to expected width, in raw loss
/// units per constraint unit.
pub fn kappa_star(config: &ExperimentConfig) -> f64 {
    let env = &config.environment;
    let (dl, da) = (env.loss_bound, env.action_radius);
    match &env.constraint {
        ConstraintSpec::Finite { table, .. } => {
            1.0 / finite_separation(table, &env.initial_class(), &env.initial_indices())
        }
        ConstraintSpec::Linear { offset, .. } | ConstraintSpec::Polytopic { offset, .. } => {
            dl * da / offset
        }
        ConstraintSpec::Glm { offset, link, .. } => {
            let (lo, hi) = link.slope_bounds(1.0 + da, 10_000);
            (hi / lo) * dl * da / (offset * lo)
        }
    }
}

/// Regret guarantee of the learning oracle in unit-loss scale.
pub fn oracle_regret_bound(config: &ExperimentConfig) -> f64 {
    let env = &config.environment;
    let t = config.horizon as f64;
    if env.constraint.is_finite() {
        let k = env.dim() as f64;
        (t * k.ln() / 2.0).sqrt()
    } else {
        let raw = 4.0
            * config.oracle.gradient_bound
            * env.action_radius
            * (t * (2.0 / config.delta).ln()).sqrt();
        raw * config.loss_scale()
    }
}

/// Certificate constants for a configuration.
pub fn regret_constants(config: &ExperimentConfig) -> RegretConstants {
    RegretConstants {
        kappa: kappa_star(config) * config.loss_scale(),
        beta: config.radius(),
        delta: config.delta,
        oracle_regret: oracle_regret_bound(config),
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundCheck {
    /// Round with the tightest slack, 0 if no round was checked.
    pub worst_round: usize,
    /// Largest observed value of the checked ratio or difference.
    pub worst: f64,
    pub checked: usize,
}

/// Per-round `expected_loss_gap / expected_width <= kappa`. Rounds whose gap
/// is at most `tol` are trivially fine and skipped.
pub fn check_kappa_ratio(records: &[RoundRecord], kappa: f64, tol: f64) -> Result<RoundCheck> {
    let mut out = RoundCheck {
        worst_round: 0,
        worst: 0.0,
        checked: 0,
    };
    for r in records {
        if r.expected_loss_gap <= tol {
            continue;
        }
        out.checked += 1;
        let ratio = if r.expected_width > 0.0 {
            r.expected_loss_gap / r.expected_width
        } else {
            f64::INFINITY
        };
        if ratio > out.worst {
            out.worst = ratio;
            out.worst_round = r.t;
        }
        if ratio > kappa + tol {
            return Err(Error::BoundViolated {
                scale: r.t as f64,
                observed: ratio,
                bound: kappa,
            });
        }
    }
    Ok(out)
}

/// Per-round `gamma >= b / (b + width(pre_map) * width_factor)`, on rounds
/// that carry a pre-map action. `width_factor` is `1 / c_lower` when widths
/// are measured after a link.
pub fn check_gamma_bound(
    records: &[RoundRecord],
    offset: f64,
    width_factor: f64,
    tol: f64,
) -> Result<RoundCheck> {
    let mut out = RoundCheck {
        worst_round: 0,
        worst: f64::NEG_INFINITY,
        checked: 0,
    };
    for r in records {
        let Some(w) = r.width_pre_map else { continue };
        out.checked += 1;
        let floor = offset / (offset + w * width_factor);
        let shortfall = floor - r.gamma;
        if shortfall > out.worst {
            out.worst = shortfall;
            out.worst_round = r.t;
        }
        if shortfall > tol {
            return Err(Error::BoundViolated {
                scale: r.t as f64,
                observed: r.gamma,
                bound: floor,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const BUDGET: u64 = 1_000_000;

    #[test]
    fn singleton_class_has_dimension_zero() {
        let f = [0.3, -0.2, 0.9];
        assert_eq!(eluder_dimension_finite(&[&f], 0.1, BUDGET).unwrap(), 0);
    }

    #[test]
    fn pair_differing_at_one_action() {
        let f = [1.0, 0.0, 0.0];
        let g = [0.0, 0.0, 0.0];
        assert_eq!(eluder_dimension_finite(&[&f, &g], 0.1, BUDGET).unwrap(), 1);
    }

    #[test]
    fn three_functions_can_reach_three() {
        // The pairwise budgets let a third action stay independent.
        let f1 = [0.0, 0.0, 0.0];
        let f2 = [0.5, -1.01, 0.0];
        let f3 = [1.05, -0.5, 1.2];
        assert_eq!(
            eluder_dimension_finite(&[&f1, &f2, &f3], 0.5, BUDGET).unwrap(),
            3
        );
    }

    #[test]
    fn large_scale_kills_independence() {
        let f = [1.0, 0.5];
        let g = [0.0, 0.0];
        assert_eq!(eluder_dimension_finite(&[&f, &g], 1.0, BUDGET).unwrap(), 0);
    }

    #[test]
    fn budget_exhaustion_reports_lower_bound() {
        let f = [1.0, 0.0];
        let g = [0.0, 1.0];
        match eluder_dimension_finite(&[&f, &g], 0.1, 1) {
            Err(Error::SearchBudgetExceeded { budget: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn count_is_zero_above_the_largest_width() {
        let widths = [0.3, 0.2, 0.1];
        let rep = violation_count_report(&widths, 1.0, 4.0, &[0.5], &|_| 1.0);
        assert_eq!(rep.checks[0].observed, 0.0);
        assert!(rep.holds());
    }

    #[test]
    fn single_round_width_sum_holds_at_alpha_two() {
        let chk = check_width_sum_bound(&[2.0], 1.0, &[2.0], &|_| 1.0).unwrap();
        assert!(chk.bound >= 2.0);
    }

    #[test]
    fn width_sum_failure_is_reported() {
        let err = check_width_sum_bound(&[5.0], 0.0, &[1.0], &|_| 0.0).unwrap_err();
        assert!(matches!(err, Error::BoundViolated { .. }));
    }

    #[test]
    fn certificate_needs_hindsight() {
        let ledger = RegretLedger::default();
        let c = RegretConstants {
            kappa: 1.0,
            beta: 1.0,
            delta: 0.05,
            oracle_regret: 0.0,
        };
        assert_eq!(
            certify_regret(&ledger, &c, &|_| 1.0),
            Err(Error::MissingHindsight)
        );
    }

    #[test]
    fn zero_regret_is_certified() {
        let ledger = RegretLedger {
            hindsight_safe_opt_loss: Some(0.0),
            loss_scale: 1.0,
            horizon: 10,
            ..Default::default()
        };
        let c = RegretConstants {
            kappa: 1.0,
            beta: 1.0,
            delta: 0.05,
            oracle_regret: 0.0,
        };
        assert!(certify_regret(&ledger, &c, &|_| 1.0).unwrap().holds());
    }

    #[test]
    fn slope_of_square_root() {
        let xs = vec![1e3, 3e3, 1e4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 2.0 * x.sqrt()).collect();
        approx::assert_relative_eq!(loglog_slope(&xs, &ys), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn finite_preset_separation() {
        let cfg = ExperimentConfig::from_preset("finite_k10", 0, 10, 0).unwrap();
        approx::assert_relative_eq!(kappa_star(&cfg), 5.0, epsilon = 1e-9);
    }
}
