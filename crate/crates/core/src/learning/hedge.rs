//! Exponential weights with sleeping experts: actions outside the announced
//! set are charged the algorithm's own expected loss, so their weight
//! relative to the pack is frozen while they sleep.

use alloc::vec;
use alloc::vec::Vec;
// Redundant whenever std is linked into the build, required otherwise.
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SleepingHedge {
    log_weights: Vec<f64>,
    eta: f64,
}

impl SleepingHedge {
    /// Learning rate `sqrt(8 ln K / T)`.
    pub fn new(arms: usize, horizon: usize) -> Self {
        let eta = (8.0 * (arms as f64).ln() / horizon.max(1) as f64).sqrt();
        Self::with_rate(arms, eta)
    }

    pub fn with_rate(arms: usize, eta: f64) -> Self {
        Self {
            log_weights: vec![0.0; arms],
            eta,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn recommend(&self, awake: &[bool]) -> Result<Vec<f64>> {
        let top = self
            .log_weights
            .iter()
            .zip(awake)
            .filter(|(_, &a)| a)
            .map(|(w, _)| *w)
            .fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::NoAwakeAction);
        }
        let mut p: Vec<f64> = self
            .log_weights
            .iter()
            .zip(awake)
            .map(|(w, &a)| if a { (w - top).exp() } else { 0.0 })
            .collect();
        let s: f64 = p.iter().sum();
        for v in &mut p {
            *v /= s;
        }
        Ok(p)
    }

    /// `dist` must be the distribution returned for this `awake` mask.
    pub fn update(&mut self, awake: &[bool], dist: &[f64], losses: &[f64]) {
        let expected: f64 = dist.iter().zip(losses).map(|(p, l)| p * l).sum();
        for ((w, &a), &l) in self.log_weights.iter_mut().zip(awake).zip(losses) {
            *w -= self.eta * if a { l } else { expected };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_when_all_awake() {
        let h = SleepingHedge::new(4, 100);
        assert_eq!(h.recommend(&[true; 4]).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn single_awake_action_gets_all_mass() {
        let h = SleepingHedge::new(3, 100);
        assert_eq!(
            h.recommend(&[false, true, false]).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn no_awake_action_is_an_error() {
        let h = SleepingHedge::new(2, 10);
        assert_eq!(h.recommend(&[false, false]), Err(Error::NoAwakeAction));
    }

    #[test]
    fn two_rounds_match_hand_arithmetic() {
        let eta = 0.5;
        let mut h = SleepingHedge::with_rate(3, eta);
        let awake1 = [true, true, false];
        let p1 = h.recommend(&awake1).unwrap();
        let l1 = [1.0, 0.0, 0.3];
        h.update(&awake1, &p1, &l1);
        // expected loss 0.5 charged to the sleeper
        let awake2 = [true, true, true];
        let p2 = h.recommend(&awake2).unwrap();
        let w = [(-0.5f64).exp(), 1.0, (-0.25f64).exp()];
        let s: f64 = w.iter().sum();
        for (p, wi) in p2.iter().zip(&w) {
            assert_relative_eq!(*p, wi / s, epsilon = 1e-12);
        }
    }
}
