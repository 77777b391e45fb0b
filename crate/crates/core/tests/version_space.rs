use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safelearn_core::engine::SetsView;
use safelearn_core::linalg::{dot, norm, Gram};
use safelearn_core::version_space::{
    ConstraintEnvelope, EllipsoidVersionSpace, GlmVersionSpace, PredictionStats,
};
use safelearn_core::{run_with_observer, Action, ExperimentConfig, Link, RunMode};

fn probes(dim: usize, radius: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let p: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(-radius..radius))
                .collect();
            if norm(&p) <= radius {
                break p;
            }
        })
        .collect()
}

/// Membership of every probe (or arm) per round: (optimistic, pessimistic).
fn membership_history(
    cfg: &ExperimentConfig,
    probes: &[Vec<f64>],
) -> Vec<(Vec<bool>, Vec<bool>, bool)> {
    let mut rows = Vec::new();
    run_with_observer(cfg, RunMode::Safe, &mut |view| {
        let (o, p) = match view.sets {
            SetsView::Continuous(vs) => probes
                .iter()
                .map(|a| {
                    let m = vs.membership(a);
                    (m.is_optimistic(), m.is_pessimistic())
                })
                .unzip(),
            SetsView::Finite(vs) => (0..vs.arms())
                .map(|a| {
                    let m = vs.membership(a);
                    (m.is_optimistic(), m.is_pessimistic())
                })
                .unzip(),
        };
        rows.push((o, p, view.truth_in_version_space));
    })
    .unwrap();
    rows
}

const PRESETS: [&str; 4] = ["linear_ball", "glm_tanh", "polytopic_m3", "finite_k10"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn version_space_is_nested(preset in 0usize..4, seed in 0u64..1000, dim in 2usize..4) {
        let cfg = ExperimentConfig::from_preset(PRESETS[preset], dim, 30, seed).unwrap();
        let pts = probes(dim, 1.0, 200, seed);
        let hist = membership_history(&cfg, &pts);
        for w in hist.windows(2) {
            let (o0, p0, _) = &w[0];
            let (o1, p1, _) = &w[1];
            for i in 0..o0.len() {
                prop_assert!(!o1[i] || o0[i], "optimistic set grew");
                prop_assert!(!p0[i] || p1[i], "pessimistic set shrank");
            }
        }
    }

    #[test]
    fn sets_bracket_the_true_safe_set(preset in 0usize..4, seed in 0u64..1000, dim in 2usize..4) {
        let cfg = ExperimentConfig::from_preset(PRESETS[preset], dim, 30, seed).unwrap();
        let env = cfg.environment.clone();
        let pts = probes(dim, 1.0, 200, seed ^ 0x55);
        let actions: Vec<Action> = if env.constraint.is_finite() {
            (0..env.dim()).map(Action::Index).collect()
        } else {
            pts.iter().cloned().map(Action::Point).collect()
        };
        for (o, p, covered) in membership_history(&cfg, &pts) {
            if !covered {
                continue;
            }
            for (i, a) in actions.iter().enumerate() {
                let v = env.constraint_eval(a);
                prop_assert!(!p[i] || v <= 0.0, "pessimistic action unsafe");
                prop_assert!(v > 0.0 || o[i], "safe action not optimistic");
            }
        }
    }

    #[test]
    fn initial_ball_stays_pessimistic(preset in 0usize..3, seed in 0u64..1000) {
        let cfg = ExperimentConfig::from_preset(PRESETS[preset], 2, 30, seed).unwrap();
        let pts = probes(2, 0.5, 100, seed);
        for (_, p, _) in membership_history(&cfg, &pts) {
            prop_assert!(p.iter().all(|&x| x));
        }
    }

    #[test]
    fn gamma_matches_bisection(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2;
        let mut gram = Gram::new(d, 1.0);
        let mut stats = PredictionStats::new(d);
        for _ in 0..5 {
            let a: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            stats.observe(&a, rng.random_range(-0.3..0.3));
            gram.add_outer(&a, 1.0);
        }
        let vs = EllipsoidVersionSpace::from_predictions(&gram, &stats, 2.0, 0.5).unwrap();
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-0.7..0.7)).collect();
        prop_assume!(vs.membership(&a).is_optimistic());
        let g = vs.gamma_scale(&a).unwrap();
        let at = |s: f64| a.iter().map(|x| x * s).collect::<Vec<f64>>();
        prop_assert!(vs.membership(&at(g)).is_pessimistic());
        if g < 1.0 {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if vs.membership(&at(mid)).is_pessimistic() { lo = mid } else { hi = mid }
            }
            prop_assert!((lo - g).abs() < 1e-9, "bisection {} vs {}", lo, g);
        }
    }

    #[test]
    fn glm_width_bounded_by_slope_times_prelink_width(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let mut gram = Gram::new(d, 1.0);
        let mut stats = PredictionStats::new(d);
        for _ in 0..4 {
            let a: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            stats.observe(&a, rng.random_range(-0.3..0.3));
            gram.add_outer(&a, 1.0);
        }
        let inner = EllipsoidVersionSpace::from_predictions(&gram, &stats, 1.0, 0.5).unwrap();
        let link = Link::Tanh;
        let (lo, hi) = link.slope_bounds(2.0, 10_000);
        let vs = GlmVersionSpace::new(inner, link, lo, hi);
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-0.57..0.57)).collect();
        prop_assert!(vs.width(&a) <= hi * vs.prelink_width(&a) + 1e-12);
    }
}

#[test]
fn f_max_agrees_with_boundary_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 3;
    let mut gram = Gram::new(d, 1.0);
    for _ in 0..6 {
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        gram.add_outer(&a, 1.0);
    }
    let center = vec![0.2, -0.1, 0.3];
    let radius = 0.8;
    let b = 0.5;
    let vs = EllipsoidVersionSpace::new(center.clone(), &gram, radius, b);
    let chol = gram.matrix().clone().cholesky().unwrap();
    let lt = chol.l().transpose();
    let a = [0.6, -0.4, 0.5];
    let mut best = f64::NEG_INFINITY;
    for _ in 0..100_000 {
        let u: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let n = norm(&u);
        let u = nalgebra::DVector::from_iterator(d, u.iter().map(|x| x / n * radius.sqrt()));
        let step = lt.clone().solve_upper_triangular(&u).unwrap();
        let f: Vec<f64> = center.iter().zip(step.iter()).map(|(c, s)| c + s).collect();
        best = best.max(dot(&f, &a) - b);
    }
    let exact = vs.ellipsoid_bounds(&a).1 - b;
    assert!(best <= exact + 1e-12, "sample {best} above exact {exact}");
    assert!(
        best >= exact - 1e-3,
        "sample {best} too far below exact {exact}"
    );
}
