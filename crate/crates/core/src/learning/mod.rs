//! Online learning oracles that play over the announced optimistic sets.

pub mod hedge;
pub mod hull;
pub mod ogd;

pub use hedge::SleepingHedge;
pub use hull::{caratheodory_reduce, min_norm_point, MinNormPoint};
pub use ogd::{OgdConfig, OgdState, Recommendation};

use rand::Rng;

/// Index drawn from a probability vector; falls back to the last positive
/// entry when rounding leaves the cumulative sum just below the draw.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last
}
