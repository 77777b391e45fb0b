//! Projection onto the convex hull of a finite point set, and reduction of a
//! convex combination to at most `d + 1` points.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::linalg::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    /// `(index, weight)` pairs over the final corral.
    pub weights: Vec<(usize, f64)>,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimizes `||x||` over the convex hull of the rows of `points`
/// (`n x dim`, row-major) with Wolfe's active-set method.
///
/// `warm` seeds the corral. Stops when the Frank-Wolfe gap
/// `||x||^2 - min_i <x, p_i>` falls below `tol^2` (which bounds the squared
/// distance to the optimum) or when no point can enter the corral.
pub fn min_norm_point(
    points: &[f64],
    dim: usize,
    warm: &[usize],
    tol: f64,
    max_iter: usize,
) -> MinNormPoint {
    let n = points.len() / dim;
    assert!(n > 0, "empty point set");
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut corral: Vec<usize> = Vec::new();
    for &w in warm {
        if w < n && !corral.contains(&w) && corral.len() <= dim {
            corral.push(w);
        }
    }
    if corral.is_empty() {
        let mut best = 0;
        let mut best_norm = f64::INFINITY;
        for i in 0..n {
            let v = dot(row(i), row(i));
            if v < best_norm {
                best_norm = v;
                best = i;
            }
        }
        corral.push(best);
    }
    let mut lambda = vec![1.0 / corral.len() as f64; corral.len()];
    let mut iterations = 0;
    minor_cycle(
        points,
        dim,
        &mut corral,
        &mut lambda,
        &mut iterations,
        max_iter,
    );
    let mut x = combine(points, dim, &corral, &lambda);
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let xx = dot(&x, &x);
        let mut j = 0;
        let mut best = f64::INFINITY;
        for i in 0..n {
            let v = dot(&x, row(i));
            if v < best {
                best = v;
                j = i;
            }
        }
        let scale = xx.max(dot(row(j), row(j))).max(1.0);
        let gap = xx - best;
        if gap <= (tol * tol).max(1e-15 * scale) || corral.contains(&j) {
            converged = true;
            break;
        }
        let before = corral.clone();
        corral.push(j);
        lambda.push(0.0);
        minor_cycle(
            points,
            dim,
            &mut corral,
            &mut lambda,
            &mut iterations,
            max_iter,
        );
        let next = combine(points, dim, &corral, &lambda);
        if corral == before || dot(&next, &next) >= xx {
            // no strict progress: we are at the optimum up to rounding
            x = if dot(&next, &next) < xx { next } else { x };
            converged = true;
            break;
        }
        x = next;
    }
    MinNormPoint {
        point: x,
        weights: corral.into_iter().zip(lambda).collect(),
        converged,
        iterations,
    }
}

fn combine(points: &[f64], dim: usize, corral: &[usize], lambda: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (&i, &l) in corral.iter().zip(lambda) {
        for (xk, pk) in x.iter_mut().zip(&points[i * dim..(i + 1) * dim]) {
            *xk += l * pk;
        }
    }
    x
}

/// Minimizer of `||sum alpha_i p_i||` subject to `sum alpha_i = 1`.
fn affine_minimizer(points: &[f64], dim: usize, corral: &[usize]) -> Vec<f64> {
    let k = corral.len();
    if k == 1 {
        return vec![1.0];
    }
    let p0 = &points[corral[0] * dim..(corral[0] + 1) * dim];
    let diffs = DMatrix::from_fn(dim, k - 1, |r, c| points[corral[c + 1] * dim + r] - p0[r]);
    let rhs = -DVector::from_column_slice(p0);
    let beta = diffs
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .expect("svd computed with both factors");
    let mut alpha = Vec::with_capacity(k);
    alpha.push(1.0 - beta.iter().sum::<f64>());
    alpha.extend(beta.iter());
    alpha
}

fn minor_cycle(
    points: &[f64],
    dim: usize,
    corral: &mut Vec<usize>,
    lambda: &mut Vec<f64>,
    iterations: &mut usize,
    max_iter: usize,
) {
    const EPS: f64 = 1e-14;
    while *iterations < max_iter {
        *iterations += 1;
        let alpha = affine_minimizer(points, dim, corral);
        if alpha.iter().any(|a| !a.is_finite()) {
            return;
        }
        if alpha.iter().all(|&a| a > EPS) {
            *lambda = alpha;
            return;
        }
        // a tiny positive alpha also counts as leaving, so the ratio can
        // exceed one; the drop index must still come from these entries
        let mut theta = f64::INFINITY;
        let mut drop = 0;
        for (i, (&a, &l)) in alpha.iter().zip(lambda.iter()).enumerate() {
            if a <= EPS {
                let t = if l - a > 0.0 { l / (l - a) } else { 0.0 };
                if t < theta {
                    theta = t;
                    drop = i;
                }
            }
        }
        let theta = theta.min(1.0);
        for (l, a) in lambda.iter_mut().zip(&alpha) {
            *l = theta * a + (1.0 - theta) * *l;
        }
        lambda[drop] = 0.0;
        let mut keep_c = Vec::with_capacity(corral.len());
        let mut keep_l = Vec::with_capacity(corral.len());
        for (&c, &l) in corral.iter().zip(lambda.iter()) {
            if l > EPS {
                keep_c.push(c);
                keep_l.push(l);
            }
        }
        let s: f64 = keep_l.iter().sum();
        for l in &mut keep_l {
            *l /= s;
        }
        *corral = keep_c;
        *lambda = keep_l;
    }
}

/// Rewrites the convex combination `sum w_i p_i` over at most `dim + 1`
/// points by repeatedly pivoting along an affine dependence. Returns kept
/// indices and their weights; the combination's value is unchanged.
pub fn caratheodory_reduce(points: &[Vec<f64>], weights: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let dim = points.first().map_or(0, Vec::len);
    let mut idx: Vec<usize> = (0..points.len()).filter(|&i| weights[i] > 0.0).collect();
    let mut w: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
    while idx.len() > dim + 1 {
        let k = idx.len();
        let m = DMatrix::from_fn(
            dim + 1,
            k,
            |r, c| {
                if r < dim {
                    points[idx[c]][r]
                } else {
                    1.0
                }
            },
        );
        let eig = SymmetricEigen::new(m.transpose() * &m);
        let mut smallest = 0;
        for i in 1..k {
            if eig.eigenvalues[i] < eig.eigenvalues[smallest] {
                smallest = i;
            }
        }
        let mut c: Vec<f64> = eig.eigenvectors.column(smallest).iter().copied().collect();
        if !c.iter().any(|&v| v > 0.0) {
            for v in &mut c {
                *v = -*v;
            }
        }
        let mut theta = f64::INFINITY;
        let mut pivot = 0;
        for (i, (&ci, &wi)) in c.iter().zip(&w).enumerate() {
            if ci > 1e-12 && wi / ci < theta {
                theta = wi / ci;
                pivot = i;
            }
        }
        for (wi, ci) in w.iter_mut().zip(&c) {
            *wi = (*wi - theta * ci).max(0.0);
        }
        w[pivot] = 0.0;
        let mut next_idx = Vec::with_capacity(k);
        let mut next_w = Vec::with_capacity(k);
        for (&i, &wi) in idx.iter().zip(&w) {
            if wi > 0.0 {
                next_idx.push(i);
                next_w.push(wi);
            }
        }
        idx = next_idx;
        w = next_w;
    }
    let s: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= s;
    }
    (idx, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nearly_tied_entering_point_keeps_corral() {
        // the entering point gets an affine weight just above zero
        let pts = [1.0, 0.0, 1.0 - 5e-15, 1.0];
        let mut corral = vec![0, 1];
        let mut lambda = vec![0.5, 0.5];
        let mut iterations = 0;
        minor_cycle(&pts, 2, &mut corral, &mut lambda, &mut iterations, 100);
        assert_eq!(corral, [0]);
        assert_relative_eq!(lambda[0], 1.0);
    }

    #[test]
    fn segment_through_origin_gives_midpoint() {
        let pts = [-1.0, 1.0];
        let r = min_norm_point(&pts, 1, &[], 1e-9, 10_000);
        assert!(r.converged);
        assert_relative_eq!(r.point[0], 0.0, epsilon = 1e-15);
        let mut w = r.weights.clone();
        w.sort_by_key(|p| p.0);
        assert_relative_eq!(w[0].1, 0.5, epsilon = 1e-12);
        assert_relative_eq!(w[1].1, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn triangle_edge_projection() {
        // triangle (1,-1), (1,1), (3,0): nearest point to the origin is (1,0)
        let pts = [1.0, -1.0, 1.0, 1.0, 3.0, 0.0];
        let r = min_norm_point(&pts, 2, &[], 1e-9, 10_000);
        assert!(r.converged);
        assert_relative_eq!(r.point[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.point[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn caratheodory_on_square_center() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        ];
        let w = [0.2; 5];
        let (idx, kept) = caratheodory_reduce(&pts, &w);
        assert!(idx.len() <= 3);
        let mut mean = [0.0; 2];
        for (&i, &wi) in idx.iter().zip(&kept) {
            mean[0] += wi * pts[i][0];
            mean[1] += wi * pts[i][1];
        }
        assert_relative_eq!(mean[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(mean[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(kept.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }
}
