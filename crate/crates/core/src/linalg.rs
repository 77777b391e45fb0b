//! Small dense helpers. Actions and parameters are plain `f64` slices; the
//! Gram matrix keeps an explicit inverse because every query is a quadratic
//! form `a^T V^-1 a` evaluated over many probe points.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
// Redundant whenever std is linked into the build, required otherwise.
#[allow(unused_imports)]
use num_traits::Float;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Projects onto the Euclidean ball of the given radius.
pub fn clip_to_ball(a: &[f64], radius: f64) -> Vec<f64> {
    let n = norm(a);
    if n > radius && n > 0.0 {
        scaled(a, radius / n)
    } else {
        a.to_vec()
    }
}

/// Quadratic form `a^T M a` for a row-major `d x d` matrix.
pub fn quad_form(m: &[f64], a: &[f64]) -> f64 {
    let d = a.len();
    let mut acc = 0.0;
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        acc += a[i] * dot(row, a);
    }
    acc
}

/// Row-major matrix-vector product.
pub fn mat_vec(m: &[f64], a: &[f64]) -> Vec<f64> {
    let d = a.len();
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], a)).collect()
}

/// Regularized Gram matrix `V = lambda I + sum a a^T` with its inverse.
#[derive(Debug, Clone)]
pub struct Gram {
    dim: usize,
    lambda: f64,
    matrix: DMatrix<f64>,
    inverse: Vec<f64>,
}

impl Gram {
    pub fn new(dim: usize, lambda: f64) -> Self {
        assert!(lambda > 0.0, "ridge parameter must be positive");
        let mut inverse = vec![0.0; dim * dim];
        for i in 0..dim {
            inverse[i * dim + i] = 1.0 / lambda;
        }
        Self {
            dim,
            lambda,
            matrix: DMatrix::identity(dim, dim) * lambda,
            inverse,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Row-major inverse.
    pub fn inverse(&self) -> &[f64] {
        &self.inverse
    }

    /// `V += w * a a^T`
    pub fn add_outer(&mut self, a: &[f64], w: f64) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.matrix[(i, j)] += w * a[i] * a[j];
            }
        }
        self.refresh_inverse();
    }

    fn refresh_inverse(&mut self) {
        let d = self.dim;
        let inv = self
            .matrix
            .clone()
            .cholesky()
            .expect("Gram matrix stays positive definite")
            .inverse();
        for i in 0..d {
            for j in 0..d {
                // symmetrize to keep quadratic forms consistent
                self.inverse[i * d + j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            }
        }
    }

    /// `a^T V^-1 a`
    pub fn inv_quad(&self, a: &[f64]) -> f64 {
        quad_form(&self.inverse, a).max(0.0)
    }

    /// `V^-1 m`
    pub fn solve(&self, m: &[f64]) -> Vec<f64> {
        mat_vec(&self.inverse, m)
    }

    /// `x^T V x`
    pub fn quad(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += x[i] * self.matrix[(i, j)] * x[j];
            }
        }
        acc
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gram_inverse_matches_direct_solve() {
        let mut g = Gram::new(2, 1.0);
        g.add_outer(&[1.0, 2.0], 1.0);
        g.add_outer(&[0.5, -1.0], 1.0);
        // V = [[2.25, 1.5], [1.5, 6.0]]
        let v = g.matrix();
        assert_relative_eq!(v[(0, 0)], 2.25);
        assert_relative_eq!(v[(0, 1)], 1.5);
        assert_relative_eq!(v[(1, 1)], 6.0);
        let x = g.solve(&[1.0, 0.0]);
        let det = 2.25 * 6.0 - 1.5 * 1.5;
        assert_relative_eq!(x[0], 6.0 / det, epsilon = 1e-14);
        assert_relative_eq!(x[1], -1.5 / det, epsilon = 1e-14);
    }

    #[test]
    fn clip_to_ball_keeps_interior_points() {
        assert_eq!(clip_to_ball(&[0.3, 0.4], 1.0), vec![0.3, 0.4]);
        let c = clip_to_ball(&[3.0, 4.0], 1.0);
        assert_relative_eq!(norm(&c), 1.0, epsilon = 1e-15);
    }
}
