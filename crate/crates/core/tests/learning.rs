use proptest::prelude::*;
use safelearn_core::learning::{
    caratheodory_reduce, min_norm_point, OgdConfig, OgdState, SleepingHedge,
};
use safelearn_core::linalg::{dot, norm, Gram};
use safelearn_core::mapping::Exp3;
use safelearn_core::version_space::{ConstraintEnvelope, EllipsoidVersionSpace};

fn project(pool: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let shifted: Vec<f64> = pool
        .iter()
        .flat_map(|p| p.iter().zip(x).map(|(a, b)| a - b))
        .collect();
    let mnp = min_norm_point(&shifted, d, &[], 1e-12, 10_000);
    mnp.point.iter().zip(x).map(|(p, xi)| p + xi).collect()
}

fn points(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), 1..14)
}

/// Plain Gaussian elimination with partial pivoting.
fn det_by_elimination(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

fn halfspace(normal: Vec<f64>, offset: f64) -> EllipsoidVersionSpace {
    let d = normal.len();
    EllipsoidVersionSpace::new(normal, &Gram::new(d, 1.0), 1e-30, offset)
}

proptest! {
    #[test]
    fn hull_projection_is_nonexpansive(
        pool in points(2),
        x in prop::collection::vec(-2.0f64..2.0, 2),
        y in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let px = project(&pool, &x);
        let py = project(&pool, &y);
        let dp: Vec<f64> = px.iter().zip(&py).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&dp) <= norm(&dx) + 1e-7);
        // variational inequality: <x - P(x), p - P(x)> <= 0 for every pool point
        let r: Vec<f64> = x.iter().zip(&px).map(|(a, b)| a - b).collect();
        for p in &pool {
            let q: Vec<f64> = p.iter().zip(&px).map(|(a, b)| a - b).collect();
            prop_assert!(dot(&r, &q) <= 1e-7);
        }
    }

    #[test]
    fn caratheodory_keeps_the_point(
        pts in points(3),
        raw in prop::collection::vec(0.01f64..1.0, 14),
    ) {
        let w: Vec<f64> = raw[..pts.len()].to_vec();
        let s: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / s).collect();
        let (keep, kw) = caratheodory_reduce(&pts, &w);
        prop_assert!(keep.len() <= 4);
        prop_assert!(kw.iter().all(|&x| x >= 0.0));
        prop_assert!((kw.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for c in 0..3 {
            let before: f64 = pts.iter().zip(&w).map(|(p, wi)| p[c] * wi).sum();
            let after: f64 = keep.iter().zip(&kw).map(|(&i, wi)| pts[i][c] * wi).sum();
            prop_assert!((before - after).abs() < 1e-9);
        }
    }

    #[test]
    fn gram_determinant_matches_brute_force(
        d in 1usize..5,
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 0..20),
        lambda in 0.1f64..2.0,
    ) {
        let mut g = Gram::new(d, lambda);
        let mut brute = vec![vec![0.0; d]; d];
        for (i, row) in brute.iter_mut().enumerate() {
            row[i] = lambda;
        }
        for r in &rows {
            let a = &r[..d];
            g.add_outer(a, 1.0);
            for i in 0..d {
                for j in 0..d {
                    brute[i][j] += a[i] * a[j];
                }
            }
        }
        let want = det_by_elimination(brute);
        prop_assert!((g.determinant() - want).abs() <= 1e-10 * want.abs());
    }

    #[test]
    fn recommendation_lives_in_the_optimistic_set(
        angle in 0.0f64..std::f64::consts::TAU,
        offset in 0.05f64..0.9,
        grads in prop::collection::vec(prop::collection::vec(-0.7f64..0.7, 2), 1..8),
    ) {
        let region = halfspace(vec![angle.cos(), angle.sin()], offset);
        let mut ogd = OgdState::new(OgdConfig {
            dim: 2,
            action_radius: 1.0,
            gradient_bound: 1.0,
            horizon: 100,
            lattice_resolution: 9,
            ray_directions: None,
            nested: true,
        }).unwrap();
        for g in &grads {
            let rec = ogd.recommend(&region).unwrap();
            prop_assert!(rec.support.len() <= 3);
            prop_assert!((rec.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for s in &rec.support {
                prop_assert!(region.membership(s).is_optimistic());
            }
            ogd.update(g).unwrap();
        }
    }

    #[test]
    fn sleeping_hedge_stays_on_awake_arms(
        awake in prop::collection::vec(any::<bool>(), 2..8),
        losses in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        prop_assume!(awake.iter().any(|&a| a));
        let k = awake.len();
        let mut h = SleepingHedge::new(k, 100);
        for _ in 0..3 {
            let p = h.recommend(&awake).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (pa, &on) in p.iter().zip(&awake) {
                prop_assert!(on || *pa == 0.0);
            }
            h.update(&awake, &p, &losses[..k]);
        }
    }

    #[test]
    fn exp3_keeps_exploration_floor(arms in 1usize..8, pulls in prop::collection::vec((0usize..8, 0.0f64..1.0), 0..30)) {
        let mut e = Exp3::new(arms, 1000);
        for (arm, loss) in pulls {
            let p = e.probabilities();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= e.gamma() / arms as f64 - 1e-15));
            e.update(arm % arms, loss, &p);
        }
    }
}

#[test]
fn ogd_follows_hand_rolled_projected_recursion() {
    // Optimistic set: unit disc cut by x1 <= 0.05.
    let region = halfspace(vec![1.0, 0.0], 0.05);
    let mut ogd = OgdState::new(OgdConfig {
        dim: 2,
        action_radius: 1.0,
        gradient_bound: 1.0,
        horizon: 4,
        lattice_resolution: 9,
        ray_directions: None,
        nested: true,
    })
    .unwrap();
    assert_eq!(ogd.eta(), 1.0);
    let r0 = ogd.recommend(&region).unwrap();
    assert!(norm(&r0.anchor) < 1e-12);

    ogd.update(&[-0.9, 0.2]).unwrap();
    let r1 = ogd.recommend(&region).unwrap();
    // (0.9, -0.2) projected onto x1 <= 0.05
    assert!((r1.anchor[0] - 0.05).abs() < 1e-12, "{:?}", r1.anchor);
    assert!((r1.anchor[1] + 0.2).abs() < 1e-12, "{:?}", r1.anchor);

    ogd.update(&[0.5, 0.5]).unwrap();
    let r2 = ogd.recommend(&region).unwrap();
    assert!((r2.anchor[0] + 0.45).abs() < 1e-12, "{:?}", r2.anchor);
    assert!((r2.anchor[1] + 0.7).abs() < 1e-12, "{:?}", r2.anchor);
}
