//! Projected online gradient descent over the convex hull of the optimistic
//! set, with the hull represented by a finite candidate pool.
//!
//! The pool holds lattice points, points where quasi-uniform rays from the
//! origin leave the set, the origin, and last round's support. A lattice
//! point is dropped from the pool whenever both of its neighbours along
//! some axis are in the pool too, since it is then their midpoint and adds
//! nothing to the hull.

use alloc::vec;
use alloc::vec::Vec;
// Redundant whenever std is linked into the build, required otherwise.
#[allow(unused_imports)]
use num_traits::Float;

use super::hull::{caratheodory_reduce, min_norm_point};
use crate::linalg::{norm, scaled};
use crate::version_space::{ConstraintEnvelope, Membership};
use crate::{Error, Result};

/// Cap on the number of lattice nodes; the per-axis resolution shrinks in
/// high dimension to respect it.
const LATTICE_CAP: usize = 40_000;
const PROJECTION_TOL: f64 = 1e-9;
const PROJECTION_MAX_ITER: usize = 10_000;
/// Relative pull-back of ray endpoints so rounding keeps them inside the set.
const RAY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OgdConfig {
    pub dim: usize,
    /// `D_a`
    pub action_radius: f64,
    /// `D_f`
    pub gradient_bound: f64,
    pub horizon: usize,
    pub lattice_resolution: usize,
    pub ray_directions: Option<usize>,
    /// Promise that successive optimistic sets shrink and pessimistic sets
    /// grow. Lets the pool freeze lattice decisions.
    pub nested: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub support: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// The projected iterate; equals the mean of the support.
    pub anchor: Vec<f64>,
    pub pool_size: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Outside,
    Undecided,
    /// In every future optimistic set.
    Kept,
    /// In no future optimistic set.
    Dropped,
}

#[derive(Debug, Clone)]
pub struct OgdState {
    cfg: OgdConfig,
    eta: f64,
    anchor: Vec<f64>,
    last_gradient: Option<Vec<f64>>,
    resolution: usize,
    nodes: Vec<Node>,
    /// Indices of nodes not yet `Outside`/`Dropped`.
    live: Vec<usize>,
    directions: Vec<f64>,
    support: Vec<Vec<f64>>,
}

impl OgdState {
    pub fn new(cfg: OgdConfig) -> Result<Self> {
        if cfg.dim == 0 || cfg.horizon == 0 {
            return Err(Error::InvalidConfig(
                "OGD needs dim >= 1 and horizon >= 1".into(),
            ));
        }
        if cfg.lattice_resolution < 2 {
            return Err(Error::InvalidConfig("lattice resolution below 2".into()));
        }
        let d = cfg.dim;
        let mut resolution = cfg.lattice_resolution;
        while resolution > 2 && resolution.saturating_pow(d as u32) > LATTICE_CAP {
            resolution -= 1;
        }
        let total = resolution.pow(d as u32);
        let mut nodes = vec![Node::Outside; total];
        let mut live = Vec::new();
        let mut p = vec![0.0; d];
        for (i, node) in nodes.iter_mut().enumerate() {
            Self::coords(i, d, resolution, cfg.action_radius, &mut p);
            if norm(&p) <= cfg.action_radius * (1.0 + 1e-12) {
                *node = Node::Undecided;
                live.push(i);
            }
        }
        let directions = directions(d, cfg.ray_directions);
        let eta = 2.0 * cfg.action_radius / (cfg.gradient_bound * (cfg.horizon as f64).sqrt());
        Ok(Self {
            anchor: vec![0.0; d],
            eta,
            last_gradient: None,
            resolution,
            nodes,
            live,
            directions,
            support: Vec::new(),
            cfg,
        })
    }

    fn coords(index: usize, d: usize, res: usize, radius: f64, out: &mut [f64]) {
        let mut rest = index;
        for x in out.iter_mut().take(d) {
            let j = rest % res;
            rest /= res;
            *x = -radius + 2.0 * radius * j as f64 / (res - 1) as f64;
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// Per-axis lattice resolution actually used.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Projects `anchor - eta * last_gradient` onto the hull of the pool and
    /// returns a distribution over at most `d + 1` pool members whose mean is
    /// the projection.
    pub fn recommend(&mut self, region: &dyn ConstraintEnvelope) -> Result<Recommendation> {
        let d = self.cfg.dim;
        let target: Vec<f64> = match &self.last_gradient {
            Some(g) => self
                .anchor
                .iter()
                .zip(g)
                .map(|(a, gi)| a - self.eta * gi)
                .collect(),
            None => self.anchor.clone(),
        };

        let mut pool: Vec<f64> = Vec::new();
        let mut warm = Vec::new();
        for s in &self.support {
            if region.membership(s).is_optimistic() {
                warm.push(pool.len() / d);
                pool.extend_from_slice(s);
            }
        }
        let origin = vec![0.0; d];
        if region.membership(&origin).is_optimistic() {
            pool.extend_from_slice(&origin);
        }
        for u in self.directions.chunks(d) {
            let reach = region.optimistic_reach(u);
            let s = if reach >= self.cfg.action_radius {
                self.cfg.action_radius
            } else {
                reach * (1.0 - RAY_MARGIN)
            };
            let p = scaled(u, s);
            if s > 0.0 && region.membership(&p).is_optimistic() {
                pool.extend_from_slice(&p);
            }
        }
        self.extend_with_lattice(region, &mut pool);

        if pool.is_empty() {
            return Err(Error::EmptyCandidatePool {
                resolution: self.resolution,
            });
        }
        let n = pool.len() / d;
        let shifted: Vec<f64> = pool
            .chunks(d)
            .flat_map(|p| p.iter().zip(&target).map(|(x, y)| x - y))
            .collect();
        let mnp = min_norm_point(&shifted, d, &warm, PROJECTION_TOL, PROJECTION_MAX_ITER);

        let members: Vec<Vec<f64>> = mnp
            .weights
            .iter()
            .map(|&(i, _)| pool[i * d..(i + 1) * d].to_vec())
            .collect();
        let w: Vec<f64> = mnp.weights.iter().map(|&(_, w)| w).collect();
        let (keep, weights) = caratheodory_reduce(&members, &w);
        let support: Vec<Vec<f64>> = keep.iter().map(|&i| members[i].clone()).collect();
        let mut anchor = vec![0.0; d];
        for (s, &wi) in support.iter().zip(&weights) {
            for (a, x) in anchor.iter_mut().zip(s) {
                *a += wi * x;
            }
        }
        self.anchor = anchor.clone();
        self.support = support.clone();
        Ok(Recommendation {
            support,
            weights,
            anchor,
            pool_size: n,
            converged: mnp.converged,
        })
    }

    fn extend_with_lattice(&mut self, region: &dyn ConstraintEnvelope, pool: &mut Vec<f64>) {
        let d = self.cfg.dim;
        let res = self.resolution;
        let radius = self.cfg.action_radius;
        let mut p = vec![0.0; d];
        let mut present = vec![false; self.nodes.len()];
        let mut still_live = Vec::with_capacity(self.live.len());
        for &i in &self.live {
            let node = self.nodes[i];
            let inside = match node {
                Node::Kept => true,
                Node::Undecided => {
                    Self::coords(i, d, res, radius, &mut p);
                    match region.membership(&p) {
                        Membership::Pessimistic => {
                            if self.cfg.nested {
                                self.nodes[i] = Node::Kept;
                            }
                            true
                        }
                        Membership::Optimistic => true,
                        Membership::Neither => {
                            if self.cfg.nested {
                                self.nodes[i] = Node::Dropped;
                            }
                            false
                        }
                    }
                }
                Node::Outside | Node::Dropped => false,
            };
            present[i] = inside;
            if !matches!(self.nodes[i], Node::Dropped) {
                still_live.push(i);
            }
        }
        self.live = still_live;

        let mut stride = 1;
        let strides: Vec<usize> = (0..d)
            .map(|_| {
                let s = stride;
                stride *= res;
                s
            })
            .collect();
        for &i in &self.live {
            if !present[i] {
                continue;
            }
            let mut rest = i;
            let mut redundant = false;
            for &s in &strides {
                let j = rest % res;
                rest /= res;
                if j > 0 && j + 1 < res && present[i - s] && present[i + s] {
                    redundant = true;
                    break;
                }
            }
            if !redundant {
                Self::coords(i, d, res, radius, &mut p);
                pool.extend_from_slice(&p);
            }
        }
    }

    /// Stores the gradient for the next projection.
    pub fn update(&mut self, gradient: &[f64]) -> Result<()> {
        if gradient.len() != self.cfg.dim {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.dim,
                got: gradient.len(),
            });
        }
        let g = norm(gradient);
        if g > self.cfg.gradient_bound * (1.0 + 1e-12) {
            return Err(Error::GradientTooLarge {
                norm: g,
                bound: self.cfg.gradient_bound,
            });
        }
        self.last_gradient = Some(gradient.to_vec());
        Ok(())
    }
}

/// Quasi-uniform unit directions, row-major.
pub(crate) fn directions(d: usize, requested: Option<usize>) -> Vec<f64> {
    match d {
        1 => vec![-1.0, 1.0],
        2 => {
            let n = requested.unwrap_or(256).max(3);
            (0..n)
                .flat_map(|i| {
                    let th = 2.0 * core::f64::consts::PI * i as f64 / n as f64;
                    [th.cos(), th.sin()]
                })
                .collect()
        }
        3 => {
            let n = requested.unwrap_or(1024).max(4);
            let golden = core::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            (0..n)
                .flat_map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    [r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
        _ => {
            let total = 3usize.pow(d as u32);
            let mut out = Vec::new();
            for code in 0..total {
                let mut rest = code;
                let v: Vec<f64> = (0..d)
                    .map(|_| {
                        let t = rest % 3;
                        rest /= 3;
                        t as f64 - 1.0
                    })
                    .collect();
                let n = norm(&v);
                if n > 0.0 {
                    out.extend(v.iter().map(|x| x / n));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Gram;
    use crate::version_space::EllipsoidVersionSpace;
    use approx::assert_relative_eq;

    fn exact_halfspace(normal: Vec<f64>, offset: f64) -> EllipsoidVersionSpace {
        let d = normal.len();
        EllipsoidVersionSpace::new(normal, &Gram::new(d, 1e12), 1e-40, offset)
    }

    fn cfg(dim: usize, horizon: usize) -> OgdConfig {
        OgdConfig {
            dim,
            action_radius: 1.0,
            gradient_bound: 1.0,
            horizon,
            lattice_resolution: 33,
            ray_directions: None,
            nested: true,
        }
    }

    #[test]
    fn zero_gradient_keeps_anchor_fixed() {
        let region = exact_halfspace(vec![1.0, 0.0], 0.5);
        let mut ogd = OgdState::new(cfg(2, 100)).unwrap();
        ogd.update(&[0.3, -0.4]).unwrap();
        let first = ogd.recommend(&region).unwrap().anchor;
        ogd.update(&[0.0, 0.0]).unwrap();
        for _ in 0..5 {
            let r = ogd.recommend(&region).unwrap();
            assert_relative_eq!(r.anchor[0], first[0], epsilon = 1e-12);
            assert_relative_eq!(r.anchor[1], first[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn interior_step_moves_by_eta_times_gradient() {
        let region = exact_halfspace(vec![1.0, 0.0], 0.5);
        let mut ogd = OgdState::new(cfg(2, 100)).unwrap();
        let g = [0.6, 0.8];
        ogd.update(&g).unwrap();
        let r = ogd.recommend(&region).unwrap();
        let eta = ogd.eta();
        assert_relative_eq!(eta, 0.2, epsilon = 1e-15);
        assert_relative_eq!(r.anchor[0], -eta * g[0], epsilon = 1e-12);
        assert_relative_eq!(r.anchor[1], -eta * g[1], epsilon = 1e-12);
    }

    #[test]
    fn one_dimensional_midpoint() {
        let region = exact_halfspace(vec![0.0], 0.5);
        let mut ogd = OgdState::new(OgdConfig {
            lattice_resolution: 2,
            ..cfg(1, 4)
        })
        .unwrap();
        let r = ogd.recommend(&region).unwrap();
        assert_relative_eq!(r.anchor[0], 0.0, epsilon = 1e-15);
        assert!(r.support.len() <= 2);
    }

    #[test]
    fn gradient_bound_is_enforced() {
        let mut ogd = OgdState::new(cfg(2, 10)).unwrap();
        assert!(matches!(
            ogd.update(&[1.0, 1.0]),
            Err(Error::GradientTooLarge { .. })
        ));
    }

    #[test]
    fn lattice_shrinks_with_dimension() {
        let ogd = OgdState::new(cfg(4, 10)).unwrap();
        assert!(ogd.resolution().pow(4) <= LATTICE_CAP);
        assert!(ogd.resolution() >= 2);
    }
}
