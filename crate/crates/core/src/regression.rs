//! Online regression oracles. Each predicts the constraint value of the
//! current action before its feedback is revealed, then absorbs the feedback.

use alloc::vec;
use alloc::vec::Vec;

use crate::environment::Link;
use crate::linalg::{clip_to_ball, dot, Gram};

/// Vovk-Azoury-Warmuth forecaster over the linear part `f . a`.
#[derive(Debug, Clone)]
pub struct VawForecaster {
    gram: Gram,
    moment: Vec<f64>,
    count: usize,
}

impl VawForecaster {
    pub fn new(dim: usize, lambda: f64) -> Self {
        Self {
            gram: Gram::new(dim, lambda),
            moment: vec![0.0; dim],
            count: 0,
        }
    }

    /// `a^T (V + a a^T)^-1 m`
    pub fn predict(&self, a: &[f64]) -> f64 {
        let va = self.gram.solve(a);
        dot(&va, &self.moment) / (1.0 + dot(&va, a))
    }

    pub fn update(&mut self, a: &[f64], z: f64) {
        self.gram.add_outer(a, 1.0);
        for (m, x) in self.moment.iter_mut().zip(a) {
            *m += z * x;
        }
        self.count += 1;
    }

    pub fn gram(&self) -> &Gram {
        &self.gram
    }

    pub fn moment(&self) -> &[f64] {
        &self.moment
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Online Newton step on the matching loss of a GLM `link(w . a - offset)`.
///
/// Curvature uses the link slope at the current iterate, floored at
/// `c_lower`; the iterate is kept in the unit ball.
#[derive(Debug, Clone)]
pub struct GlmForecaster {
    link: Link,
    offset: f64,
    c_lower: f64,
    curvature: Gram,
    weights: Vec<f64>,
    count: usize,
}

impl GlmForecaster {
    pub fn new(dim: usize, lambda: f64, link: Link, offset: f64, c_lower: f64) -> Self {
        Self {
            link,
            offset,
            c_lower,
            curvature: Gram::new(dim, lambda),
            weights: vec![0.0; dim],
            count: 0,
        }
    }

    /// Pre-link prediction `w . a`.
    pub fn predict_prelink(&self, a: &[f64]) -> f64 {
        dot(&self.weights, a)
    }

    pub fn predict(&self, a: &[f64]) -> f64 {
        self.link.eval(self.predict_prelink(a) - self.offset)
    }

    pub fn update(&mut self, a: &[f64], z: f64) {
        let u = self.predict_prelink(a) - self.offset;
        let residual = self.link.eval(u) - z;
        let slope = self.link.derivative(u).max(self.c_lower);
        self.curvature.add_outer(a, slope);
        let step = self.curvature.solve(a);
        for (w, s) in self.weights.iter_mut().zip(&step) {
            *w -= residual * s;
        }
        self.weights = clip_to_ball(&self.weights, 1.0);
        self.count += 1;
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Follow-the-leader over a finite table: predicts with the lowest-index
/// function of minimal cumulative squared error against the raw feedback.
#[derive(Debug, Clone)]
pub struct FiniteForecaster {
    class: Vec<usize>,
    errors: Vec<f64>,
    count: usize,
}

impl FiniteForecaster {
    /// `class` holds table row ids, in increasing order.
    pub fn new(class: Vec<usize>) -> Self {
        let n = class.len();
        Self {
            class,
            errors: vec![0.0; n],
            count: 0,
        }
    }

    pub fn leader(&self) -> usize {
        let mut best = 0;
        for (i, &e) in self.errors.iter().enumerate() {
            if e < self.errors[best] {
                best = i;
            }
        }
        self.class[best]
    }

    pub fn predict(&self, table: &[Vec<f64>], arm: usize) -> f64 {
        table[self.leader()][arm]
    }

    pub fn update(&mut self, table: &[Vec<f64>], arm: usize, z: f64) {
        for (e, &j) in self.errors.iter_mut().zip(&self.class) {
            let r = table[j][arm] - z;
            *e += r * r;
        }
        self.count += 1;
    }

    /// Cumulative squared error per class member, aligned with `class`.
    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn count(&self) -> usize {
        self.count
    }
}
