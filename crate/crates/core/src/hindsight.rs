//! Best fixed safe action in hindsight, computed with knowledge of the true
//! constraint.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
// Redundant whenever std is linked into the build, required otherwise.
#[allow(unused_imports)]
use num_traits::Float;

use crate::environment::ConstraintSpec;
use crate::linalg::{dot, norm, norm_sq};
use crate::types::Action;
use crate::{Error, Result};

const FEAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HindsightOptimum {
    pub action: Action,
    pub value: f64,
    /// Residual of the stationarity system at the returned point (zero for
    /// finite action spaces).
    pub kkt_residual: f64,
}

/// Sums loss descriptors coordinate-wise.
pub fn cumulative_loss(history: &[Vec<f64>]) -> Vec<f64> {
    let dim = history.first().map_or(0, Vec::len);
    let mut sum = vec![0.0; dim];
    for l in history {
        for (s, v) in sum.iter_mut().zip(l) {
            *s += v;
        }
    }
    sum
}

/// Minimizes the cumulative loss over the true safe set.
pub fn hindsight_best_safe(
    loss_history: &[Vec<f64>],
    constraint: &ConstraintSpec,
    action_radius: f64,
) -> Result<HindsightOptimum> {
    let total = cumulative_loss(loss_history);
    let total = if total.is_empty() {
        vec![0.0; constraint.dim()]
    } else {
        total
    };
    match constraint {
        ConstraintSpec::Finite { table, truth } => {
            let row = &table[*truth];
            let mut best: Option<(usize, f64)> = None;
            for (k, &f) in row.iter().enumerate() {
                if f <= 0.0 && best.is_none_or(|(_, v)| total[k] < v) {
                    best = Some((k, total[k]));
                }
            }
            let (k, value) = best.ok_or(Error::NoSafeAction)?;
            Ok(HindsightOptimum {
                action: Action::Index(k),
                value,
                kkt_residual: 0.0,
            })
        }
        ConstraintSpec::Linear { normal, offset } | ConstraintSpec::Glm { normal, offset, .. } => {
            // a monotone link with sigma(0) = 0 leaves the halfspace unchanged
            linear_program_on_ball(
                &total,
                core::slice::from_ref(normal),
                *offset,
                action_radius,
            )
        }
        ConstraintSpec::Polytopic { rows, offset } => {
            linear_program_on_ball(&total, rows, *offset, action_radius)
        }
    }
}

/// Minimizes `c . a` over `{||a|| <= radius, r_i . a <= b}` by enumerating
/// candidate optimal faces, then checks stationarity at the winner.
pub fn linear_program_on_ball(
    c: &[f64],
    rows: &[Vec<f64>],
    b: f64,
    radius: f64,
) -> Result<HindsightOptimum> {
    let d = c.len();
    let feasible = |a: &[f64]| {
        norm(a) <= radius * (1.0 + FEAS_TOL) + FEAS_TOL
            && rows.iter().all(|r| dot(r, a) <= b + FEAS_TOL)
    };
    let mut candidates: Vec<Vec<f64>> = vec![vec![0.0; d]];
    let cn = norm(c);
    if cn > 0.0 {
        candidates.push(c.iter().map(|x| -radius * x / cn).collect());
    }
    let m = rows.len();
    for mask in 1u32..(1 << m) {
        let active: Vec<&Vec<f64>> = (0..m)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &rows[i])
            .collect();
        if active.len() > d {
            continue;
        }
        let a_mat = DMatrix::from_fn(active.len(), d, |i, j| active[i][j]);
        let svd = a_mat.clone().svd(true, true);
        let rhs = DVector::from_element(active.len(), b);
        let Ok(a0) = svd.solve(&rhs, 1e-12) else {
            continue;
        };
        if (&a_mat * &a0 - &rhs).norm() > 1e-9 {
            continue;
        }
        let a0: Vec<f64> = a0.iter().copied().collect();
        candidates.push(a0.clone());
        // project c onto the null space of the active rows
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12).count();
        let v_t = svd.v_t.expect("requested");
        let mut pc = c.to_vec();
        for k in 0..rank {
            let v: Vec<f64> = v_t.row(k).iter().copied().collect();
            let proj = dot(&v, c);
            for (p, vi) in pc.iter_mut().zip(&v) {
                *p -= proj * vi;
            }
        }
        let slack = radius * radius - norm_sq(&a0);
        if slack < 0.0 {
            continue;
        }
        let pn = norm(&pc);
        if pn > 1e-12 {
            let s = slack.sqrt() / pn;
            candidates.push(a0.iter().zip(&pc).map(|(x, p)| x - s * p).collect());
        }
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for cand in candidates {
        if !feasible(&cand) {
            continue;
        }
        let v = dot(c, &cand);
        if best.as_ref().is_none_or(|(_, bv)| v < *bv - 1e-15) {
            best = Some((cand, v));
        }
    }
    let (action, value) = best.ok_or(Error::NoSafeAction)?;
    let kkt_residual = stationarity_residual(c, rows, b, radius, &action);
    Ok(HindsightOptimum {
        action: Action::Point(action),
        value,
        kkt_residual,
    })
}

/// Distance from `-c` to the cone spanned by the active constraint normals
/// (approximated by a least-squares fit with negative multipliers clamped).
pub fn stationarity_residual(c: &[f64], rows: &[Vec<f64>], b: f64, radius: f64, a: &[f64]) -> f64 {
    let d = c.len();
    let mut grads: Vec<Vec<f64>> = rows
        .iter()
        .filter(|r| (dot(r, a) - b).abs() <= 1e-8)
        .cloned()
        .collect();
    if (norm(a) - radius).abs() <= 1e-8 * radius.max(1.0) {
        grads.push(a.to_vec());
    }
    if grads.is_empty() {
        return norm(c);
    }
    let g = DMatrix::from_fn(d, grads.len(), |i, j| grads[j][i]);
    let target = -DVector::from_column_slice(c);
    let mu = g
        .clone()
        .svd(true, true)
        .solve(&target, 1e-12)
        .expect("svd computed with both factors");
    let mu = mu.map(|x| x.max(0.0));
    (g * mu - target).norm()
}
