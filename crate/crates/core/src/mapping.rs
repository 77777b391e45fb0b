//! Mappings from a recommendation over the optimistic set to an action
//! distribution over the pessimistic set.

use alloc::vec;
use alloc::vec::Vec;
// Redundant whenever std is linked into the build, required otherwise.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::learning::sample_index;
use crate::types::MappingId;
use crate::version_space::{ConstraintEnvelope, FiniteVersionSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MappingOutcome {
    pub pre_map_action: Vec<f64>,
    pub post_map_action: Vec<f64>,
    pub gamma: f64,
    pub mapping_id: MappingId,
}

/// Shrinks `pre` toward the origin until it is pessimistic.
pub fn scaling_map(region: &dyn ConstraintEnvelope, pre: &[f64]) -> Result<MappingOutcome> {
    let gamma = region.gamma_scale(pre)?;
    Ok(MappingOutcome {
        pre_map_action: pre.to_vec(),
        post_map_action: pre.iter().map(|x| gamma * x).collect(),
        gamma,
        mapping_id: MappingId::Scaling,
    })
}

fn no_pessimistic() -> Error {
    Error::EmptyPessimisticSet { round: 0 }
}

/// While several models survive, play the widest pessimistic arm; once one
/// survives, move the mass the recommendation puts outside the pessimistic
/// set uniformly onto it.
pub fn explore_exploit_map(recommended: &[f64], vs: &FiniteVersionSpace) -> Result<Vec<f64>> {
    let pess = vs.pessimistic_set();
    if pess.is_empty() {
        return Err(no_pessimistic());
    }
    let mut p = vec![0.0; recommended.len()];
    if vs.survivors().len() > 1 {
        let mut best = pess[0];
        for &a in &pess {
            if vs.width(a) > vs.width(best) {
                best = a;
            }
        }
        p[best] = 1.0;
        return Ok(p);
    }
    let mut outside = 0.0;
    for (a, &q) in recommended.iter().enumerate() {
        if pess.contains(&a) {
            p[a] = q;
        } else {
            outside += q;
        }
    }
    let share = outside / pess.len() as f64;
    for &a in &pess {
        p[a] += share;
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub distribution: Vec<f64>,
    pub objective: f64,
    /// Minimizing pair of surviving table rows.
    pub pair: (usize, usize),
}

/// `sum_a max(p_a - q_a, 0) - kappa * sum_a p_a w_a`, the saddle objective
/// after the sup over loss vectors in `[0, 1]^K`.
pub fn saddle_objective(p: &[f64], recommended: &[f64], weights: &[f64], kappa: f64) -> f64 {
    p.iter()
        .zip(recommended)
        .zip(weights)
        .map(|((&pa, &qa), &w)| (pa - qa).max(0.0) - kappa * pa * w)
        .sum()
}

/// Exact minimizer over the simplex on the pessimistic set and over
/// survivor pairs.
///
/// For a fixed pair the objective is separable and each coordinate's cost is
/// convex piecewise linear with slope `-kappa w_a` up to `q_a` and
/// `1 - kappa w_a` beyond, so filling the cheapest slopes first is optimal.
pub fn saddle_map_finite(
    kappa: f64,
    recommended: &[f64],
    table: &[Vec<f64>],
    vs: &FiniteVersionSpace,
) -> Result<SaddleSolution> {
    let pess = vs.pessimistic_set();
    if pess.is_empty() {
        return Err(no_pessimistic());
    }
    let k = recommended.len();
    let surv = vs.survivors();
    let mut best: Option<SaddleSolution> = None;
    for (i, &g) in surv.iter().enumerate() {
        for &h in &surv[i..] {
            let w: Vec<f64> = (0..k).map(|a| (table[g][a] - table[h][a]).abs()).collect();
            // (slope, arm, capacity); the stable sort keeps lower arms and
            // first segments ahead on ties
            let mut segments: Vec<(f64, usize, f64)> = Vec::with_capacity(2 * pess.len());
            for &a in &pess {
                segments.push((-kappa * w[a], a, recommended[a]));
                segments.push((1.0 - kappa * w[a], a, f64::INFINITY));
            }
            segments.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut p = vec![0.0; k];
            let mut left = 1.0;
            for (_, a, cap) in segments {
                if left <= 0.0 {
                    break;
                }
                let take = left.min(cap);
                p[a] += take;
                left -= take;
            }
            let objective = saddle_objective(&p, recommended, &w, kappa);
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(SaddleSolution {
                    distribution: p,
                    objective,
                    pair: (g, h),
                });
            }
        }
    }
    Ok(best.expect("at least one survivor"))
}

/// `{2^i : i = 0..=floor(log2 sqrt(T))}`
pub fn kappa_grid(horizon: usize) -> Vec<f64> {
    let top = (horizon.max(1) as f64).sqrt().log2().floor() as i32;
    (0..=top.max(0)).map(|i| 2f64.powi(i)).collect()
}

/// EXP3 with exploration rate `min(1, sqrt(K ln K / T))`.
#[derive(Debug, Clone)]
pub struct Exp3 {
    log_weights: Vec<f64>,
    gamma: f64,
}

impl Exp3 {
    pub fn new(arms: usize, horizon: usize) -> Self {
        let k = arms as f64;
        let gamma = (k * k.ln() / horizon.max(1) as f64).sqrt().min(1.0);
        Self::with_rate(arms, gamma)
    }

    pub fn with_rate(arms: usize, gamma: f64) -> Self {
        assert!(arms > 0);
        Self {
            log_weights: vec![0.0; arms],
            gamma,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let k = self.log_weights.len() as f64;
        let top = self
            .log_weights
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter()
            .map(|x| (1.0 - self.gamma) * x / s + self.gamma / k)
            .collect()
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let p = self.probabilities();
        (sample_index(&p, rng), p)
    }

    /// Importance-weighted update with a loss in `[0, 1]`.
    pub fn update(&mut self, arm: usize, loss: f64, probabilities: &[f64]) {
        let k = self.log_weights.len() as f64;
        let estimate = loss / probabilities[arm];
        self.log_weights[arm] -= self.gamma / k * estimate;
    }
}
