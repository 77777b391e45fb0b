//! Version spaces and the optimistic/pessimistic sets derived from them.
//!
//! Continuous spaces are ellipsoids built from the regression oracle's own
//! predictions. For a class inside the unit ball, any `f` with
//! `sum_s (f . a_s - zhat_s)^2 <= beta` also satisfies
//! `||f - fhat||_V^2 <= beta + lambda - r_min`, where `fhat` is the ridge
//! solution on the predictions and `r_min` its objective value. Queries take
//! the ellipsoid extremes and intersect them with the unit-ball extremes
//! `[-||a||, ||a||]`. Both pieces are positively homogeneous in `a`, which
//! makes the optimistic and pessimistic sets star-shaped around the origin.

use alloc::vec;
use alloc::vec::Vec;
// Redundant whenever std is linked into the build, required otherwise.
#[allow(unused_imports)]
use num_traits::Float;

use crate::environment::Link;
use crate::linalg::{dot, norm, norm_sq, quad_form, Gram};
use crate::{Error, Result};

/// Guard in the scaling denominator.
pub const TINY: f64 = 1e-12;
/// Relative shrink applied to the exact scaling factor so that rounding can
/// never push the scaled action out of the pessimistic set.
const GAMMA_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Pessimistic,
    Optimistic,
    Neither,
}

impl Membership {
    pub fn is_optimistic(self) -> bool {
        !matches!(self, Membership::Neither)
    }

    pub fn is_pessimistic(self) -> bool {
        matches!(self, Membership::Pessimistic)
    }
}

/// Queries the round loop needs from a continuous version space.
pub trait ConstraintEnvelope {
    fn dim(&self) -> usize;

    /// Known offset `b`.
    fn offset(&self) -> f64;

    /// `(min_f f(a), max_f f(a))` over the version space.
    fn bounds(&self, a: &[f64]) -> (f64, f64);

    fn f_min(&self, a: &[f64]) -> f64 {
        self.bounds(a).0
    }

    fn f_max(&self, a: &[f64]) -> f64 {
        self.bounds(a).1
    }

    fn width(&self, a: &[f64]) -> f64 {
        let (lo, hi) = self.bounds(a);
        (hi - lo).max(0.0)
    }

    fn membership(&self, a: &[f64]) -> Membership {
        let (lo, hi) = self.bounds(a);
        if hi <= 0.0 {
            Membership::Pessimistic
        } else if lo <= 0.0 {
            Membership::Optimistic
        } else {
            Membership::Neither
        }
    }

    /// Supremum of `s >= 0` with `s a` pessimistic (possibly infinite).
    fn pessimistic_reach(&self, a: &[f64]) -> f64;

    /// Supremum of `s >= 0` with `s a` optimistic (possibly infinite).
    fn optimistic_reach(&self, a: &[f64]) -> f64;

    /// Largest `gamma` in `[0, 1]` with `gamma a` pessimistic.
    fn gamma_scale(&self, a: &[f64]) -> Result<f64> {
        let f_min = self.f_min(a);
        if f_min > 0.0 {
            return Err(Error::ActionNotOptimistic { f_min });
        }
        let reach = self.pessimistic_reach(a);
        if reach >= 1.0 {
            Ok(1.0)
        } else {
            Ok(reach * (1.0 - GAMMA_MARGIN))
        }
    }
}

/// Extent along a ray before a homogeneous bound `s * v` crosses `b`.
fn reach(v: f64, b: f64) -> f64 {
    if v <= 0.0 {
        f64::INFINITY
    } else {
        b / v.max(TINY)
    }
}

/// Running sums of the regression predictions, enough to rebuild the ellipsoid.
#[derive(Debug, Clone)]
pub struct PredictionStats {
    sum_za: Vec<f64>,
    sum_zz: f64,
}

impl PredictionStats {
    pub fn new(dim: usize) -> Self {
        Self {
            sum_za: vec![0.0; dim],
            sum_zz: 0.0,
        }
    }

    pub fn observe(&mut self, a: &[f64], zhat: f64) {
        for (s, x) in self.sum_za.iter_mut().zip(a) {
            *s += zhat * x;
        }
        self.sum_zz += zhat * zhat;
    }
}

#[derive(Debug, Clone)]
pub struct EllipsoidVersionSpace {
    center: Vec<f64>,
    gram: Vec<f64>,
    inverse: Vec<f64>,
    radius: f64,
    offset: f64,
}

impl EllipsoidVersionSpace {
    /// Ellipsoid `{f : ||f - center||_V^2 <= radius}`.
    pub fn new(center: Vec<f64>, gram: &Gram, radius: f64, offset: f64) -> Self {
        let d = gram.dim();
        let m = gram.matrix();
        let mut flat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                flat[i * d + j] = m[(i, j)];
            }
        }
        Self {
            center,
            gram: flat,
            inverse: gram.inverse().to_vec(),
            radius,
            offset,
        }
    }

    /// Superset of `{||f|| <= 1 : sum (f . a_s - zhat_s)^2 <= beta}`. `None`
    /// when the bound certifies that set is empty.
    pub fn from_predictions(
        gram: &Gram,
        stats: &PredictionStats,
        beta: f64,
        offset: f64,
    ) -> Option<Self> {
        let center = gram.solve(&stats.sum_za);
        let r_min = (stats.sum_zz - dot(&center, &stats.sum_za)).max(0.0);
        let radius = beta + gram.lambda() - r_min;
        if radius <= 0.0 {
            return None;
        }
        Some(Self::new(center, gram, radius, offset))
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Extremes of `f . a` over the ellipsoid alone.
    pub fn ellipsoid_bounds(&self, a: &[f64]) -> (f64, f64) {
        let mid = dot(&self.center, a);
        let half = (self.radius * quad_form(&self.inverse, a).max(0.0)).sqrt();
        (mid - half, mid + half)
    }

    /// Extremes of `f . a` over the ellipsoid, intersected with the unit-ball range.
    pub fn linear_bounds(&self, a: &[f64]) -> (f64, f64) {
        let (lo, hi) = self.ellipsoid_bounds(a);
        let r = norm(a);
        let hi = hi.min(r);
        let lo = lo.max(-r).min(hi);
        (lo, hi)
    }

    pub fn contains(&self, f: &[f64]) -> bool {
        let diff: Vec<f64> = f.iter().zip(&self.center).map(|(x, c)| x - c).collect();
        quad_form(&self.gram, &diff) <= self.radius
    }
}

impl ConstraintEnvelope for EllipsoidVersionSpace {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn offset(&self) -> f64 {
        self.offset
    }

    fn bounds(&self, a: &[f64]) -> (f64, f64) {
        let (lo, hi) = self.linear_bounds(a);
        (lo - self.offset, hi - self.offset)
    }

    fn pessimistic_reach(&self, a: &[f64]) -> f64 {
        reach(self.linear_bounds(a).1, self.offset)
    }

    fn optimistic_reach(&self, a: &[f64]) -> f64 {
        reach(self.linear_bounds(a).0, self.offset)
    }
}

/// Ellipsoid over the pre-link parameter, pushed through a monotone link.
#[derive(Debug, Clone)]
pub struct GlmVersionSpace {
    inner: EllipsoidVersionSpace,
    link: Link,
    c_lower: f64,
    c_upper: f64,
}

impl GlmVersionSpace {
    pub fn new(inner: EllipsoidVersionSpace, link: Link, c_lower: f64, c_upper: f64) -> Self {
        Self {
            inner,
            link,
            c_lower,
            c_upper,
        }
    }

    pub fn inner(&self) -> &EllipsoidVersionSpace {
        &self.inner
    }

    pub fn c_lower(&self) -> f64 {
        self.c_lower
    }

    pub fn c_upper(&self) -> f64 {
        self.c_upper
    }

    /// `c_upper / c_lower`
    pub fn ratio(&self) -> f64 {
        self.c_upper / self.c_lower
    }

    pub fn prelink_width(&self, a: &[f64]) -> f64 {
        self.inner.width(a)
    }
}

impl ConstraintEnvelope for GlmVersionSpace {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn offset(&self) -> f64 {
        self.inner.offset
    }

    fn bounds(&self, a: &[f64]) -> (f64, f64) {
        let (lo, hi) = self.inner.bounds(a);
        (self.link.eval(lo), self.link.eval(hi))
    }

    // sigma(0) = 0 and sigma is monotone, so the sets match the pre-link ones.
    fn pessimistic_reach(&self, a: &[f64]) -> f64 {
        self.inner.pessimistic_reach(a)
    }

    fn optimistic_reach(&self, a: &[f64]) -> f64 {
        self.inner.optimistic_reach(a)
    }
}

/// One ellipsoid per constraint row; the constraint is the row maximum.
#[derive(Debug, Clone)]
pub struct ProductVersionSpace {
    components: Vec<EllipsoidVersionSpace>,
}

impl ProductVersionSpace {
    pub fn new(components: Vec<EllipsoidVersionSpace>) -> Self {
        assert!(!components.is_empty());
        Self { components }
    }

    pub fn components(&self) -> &[EllipsoidVersionSpace] {
        &self.components
    }

    pub fn row_bounds(&self, a: &[f64]) -> Vec<(f64, f64)> {
        self.components.iter().map(|c| c.bounds(a)).collect()
    }
}

impl ConstraintEnvelope for ProductVersionSpace {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn offset(&self) -> f64 {
        self.components[0].offset
    }

    fn bounds(&self, a: &[f64]) -> (f64, f64) {
        self.components
            .iter()
            .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                let (l, h) = c.bounds(a);
                (lo.max(l), hi.max(h))
            })
    }

    fn width(&self, a: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| c.width(a))
            .fold(0.0, f64::max)
    }

    fn pessimistic_reach(&self, a: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| c.pessimistic_reach(a))
            .fold(f64::INFINITY, f64::min)
    }

    fn optimistic_reach(&self, a: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| c.optimistic_reach(a))
            .fold(f64::INFINITY, f64::min)
    }
}

/// The continuous version spaces the engine builds.
#[derive(Debug, Clone)]
pub enum ContinuousVersionSpace {
    Linear(EllipsoidVersionSpace),
    Glm(GlmVersionSpace),
    Product(ProductVersionSpace),
}

impl ContinuousVersionSpace {
    fn envelope(&self) -> &dyn ConstraintEnvelope {
        match self {
            ContinuousVersionSpace::Linear(v) => v,
            ContinuousVersionSpace::Glm(v) => v,
            ContinuousVersionSpace::Product(v) => v,
        }
    }
}

impl ConstraintEnvelope for ContinuousVersionSpace {
    fn dim(&self) -> usize {
        self.envelope().dim()
    }
    fn offset(&self) -> f64 {
        self.envelope().offset()
    }
    fn bounds(&self, a: &[f64]) -> (f64, f64) {
        self.envelope().bounds(a)
    }
    fn width(&self, a: &[f64]) -> f64 {
        self.envelope().width(a)
    }
    fn pessimistic_reach(&self, a: &[f64]) -> f64 {
        self.envelope().pessimistic_reach(a)
    }
    fn optimistic_reach(&self, a: &[f64]) -> f64 {
        self.envelope().optimistic_reach(a)
    }
}

/// Surviving members of a finite class with their per-arm extremes.
#[derive(Debug, Clone)]
pub struct FiniteVersionSpace {
    survivors: Vec<usize>,
    f_min: Vec<f64>,
    f_max: Vec<f64>,
}

impl FiniteVersionSpace {
    /// `None` if no survivor remains.
    pub fn new(table: &[Vec<f64>], survivors: Vec<usize>) -> Option<Self> {
        if survivors.is_empty() {
            return None;
        }
        let k = table[0].len();
        let mut f_min = vec![f64::INFINITY; k];
        let mut f_max = vec![f64::NEG_INFINITY; k];
        for &j in &survivors {
            for a in 0..k {
                f_min[a] = f_min[a].min(table[j][a]);
                f_max[a] = f_max[a].max(table[j][a]);
            }
        }
        Some(Self {
            survivors,
            f_min,
            f_max,
        })
    }

    /// Members of `class` whose squared deviation from the predictions
    /// `(arm, zhat)` stays within `beta`.
    pub fn from_history(
        table: &[Vec<f64>],
        class: &[usize],
        history: &[(usize, f64)],
        beta: f64,
    ) -> Option<Self> {
        let survivors = class
            .iter()
            .copied()
            .filter(|&j| {
                let dev: f64 = history
                    .iter()
                    .map(|&(a, z)| {
                        let r = table[j][a] - z;
                        r * r
                    })
                    .sum();
                dev <= beta
            })
            .collect();
        Self::new(table, survivors)
    }

    pub fn survivors(&self) -> &[usize] {
        &self.survivors
    }

    pub fn arms(&self) -> usize {
        self.f_min.len()
    }

    pub fn f_min(&self, arm: usize) -> f64 {
        self.f_min[arm]
    }

    pub fn f_max(&self, arm: usize) -> f64 {
        self.f_max[arm]
    }

    pub fn width(&self, arm: usize) -> f64 {
        self.f_max[arm] - self.f_min[arm]
    }

    pub fn membership(&self, arm: usize) -> Membership {
        if self.f_max[arm] <= 0.0 {
            Membership::Pessimistic
        } else if self.f_min[arm] <= 0.0 {
            Membership::Optimistic
        } else {
            Membership::Neither
        }
    }

    pub fn optimistic_set(&self) -> Vec<usize> {
        (0..self.arms())
            .filter(|&a| self.membership(a).is_optimistic())
            .collect()
    }

    pub fn pessimistic_set(&self) -> Vec<usize> {
        (0..self.arms())
            .filter(|&a| self.membership(a).is_pessimistic())
            .collect()
    }
}

/// Is `f` inside the version space defined by predictions? Used by tests and
/// by the engine's coverage bookkeeping.
pub fn deviation(f: &[f64], actions: &[Vec<f64>], predictions: &[f64]) -> f64 {
    actions
        .iter()
        .zip(predictions)
        .map(|(a, z)| {
            let r = dot(f, a) - z;
            r * r
        })
        .sum()
}

/// `true` when `||f|| <= 1` and the prediction deviation is within `beta`.
pub fn in_linear_version_space(
    f: &[f64],
    actions: &[Vec<f64>],
    predictions: &[f64],
    beta: f64,
) -> bool {
    norm_sq(f) <= 1.0 && deviation(f, actions, predictions) <= beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_example() -> EllipsoidVersionSpace {
        EllipsoidVersionSpace::new(vec![0.0], &Gram::new(1, 1.0), 1.0, 0.5)
    }

    #[test]
    fn zero_action_bounds_equal_minus_offset() {
        let v = unit_example();
        assert_eq!(v.bounds(&[0.0]), (-0.5, -0.5));
        assert_eq!(v.membership(&[0.0]), Membership::Pessimistic);
    }

    #[test]
    fn scalar_example() {
        let v = unit_example();
        assert_eq!(v.f_min(&[1.0]), -1.5);
        assert_eq!(v.f_max(&[1.0]), 0.5);
        assert_eq!(v.width(&[1.0]), 2.0);
        assert_eq!(v.membership(&[1.0]), Membership::Optimistic);
    }

    #[test]
    fn gamma_halves_when_prelink_max_is_twice_offset() {
        let v = EllipsoidVersionSpace::new(vec![0.0, 0.0], &Gram::new(2, 1.0), 1.0, 1.0);
        let a = [2.0, 0.0];
        assert_relative_eq!(v.f_max(&a) + 1.0, 2.0, epsilon = 1e-15);
        let g = v.gamma_scale(&a).unwrap();
        assert_relative_eq!(g, 0.5, epsilon = 1e-9);
        // bisection with the membership oracle finds the same maximal scale
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if v.membership(&[mid * a[0], mid * a[1]]).is_pessimistic() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - g).abs() <= 1e-9);
        assert!(v.membership(&[g * a[0], g * a[1]]).is_pessimistic());
    }

    #[test]
    fn gamma_rejects_non_optimistic_action() {
        let v = EllipsoidVersionSpace::new(vec![1.0], &Gram::new(1, 1e12), 1e-30, 0.1);
        assert!(matches!(
            v.gamma_scale(&[1.0]),
            Err(Error::ActionNotOptimistic { .. })
        ));
    }

    #[test]
    fn from_predictions_contains_consistent_functions() {
        let mut gram = Gram::new(2, 1.0);
        let mut stats = PredictionStats::new(2);
        let f = [0.6, -0.5];
        let actions = [[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]];
        let preds = [0.65, -0.45, 0.1];
        for (a, z) in actions.iter().zip(&preds) {
            gram.add_outer(a, 1.0);
            stats.observe(a, *z);
        }
        let acts: Vec<Vec<f64>> = actions.iter().map(|a| a.to_vec()).collect();
        let dev = deviation(&f, &acts, &preds);
        let v = EllipsoidVersionSpace::from_predictions(&gram, &stats, dev, 0.5).unwrap();
        assert!(v.contains(&f));
    }

    #[test]
    fn finite_singleton_has_zero_width() {
        let table = vec![vec![-0.2, 0.3], vec![-0.1, -0.4]];
        let v = FiniteVersionSpace::new(&table, vec![1]).unwrap();
        assert_eq!(v.width(0), 0.0);
        assert_eq!(v.width(1), 0.0);
        assert_eq!(v.pessimistic_set(), vec![0, 1]);
    }

    #[test]
    fn finite_history_filters_by_budget() {
        let table = vec![vec![0.0, 1.0], vec![0.0, -1.0]];
        let v =
            FiniteVersionSpace::from_history(&table, &[0, 1], &[(1, 0.9), (1, 1.1)], 0.5).unwrap();
        assert_eq!(v.survivors(), &[0]);
    }

    #[test]
    fn product_membership_is_intersection() {
        let g = Gram::new(2, 1.0);
        let rows = vec![
            EllipsoidVersionSpace::new(vec![1.0, 0.0], &g, 0.04, 0.5),
            EllipsoidVersionSpace::new(vec![0.0, 1.0], &g, 0.04, 0.5),
        ];
        let p = ProductVersionSpace::new(rows);
        assert_eq!(p.membership(&[0.2, 0.2]), Membership::Pessimistic);
        assert_eq!(p.membership(&[0.2, 0.9]), Membership::Neither);
        let a = [0.2, 0.6];
        assert_eq!(p.membership(&a), Membership::Optimistic);
        // row 2's upper bound is capped by the unit ball at ||a||
        let expect = 0.5 / 0.4f64.sqrt();
        assert_relative_eq!(p.gamma_scale(&a).unwrap(), expect, epsilon = 1e-9);
        assert_relative_eq!(p.width(&a), 0.4 * 0.4f64.sqrt(), epsilon = 1e-12);
    }
}
