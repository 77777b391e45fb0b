use proptest::prelude::*;
use safelearn_core::analysis::{
    alpha_grid, check_width_sum_bound, eluder_dimension_finite, epsilon_grid, linear_eluder,
    violation_count_report, DEFAULT_SEARCH_BUDGET,
};
use safelearn_core::{run_safe_learning, ExperimentConfig};

fn class() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..5, 2usize..6)
        .prop_flat_map(|(n, k)| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, k), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eluder_is_nonincreasing_in_scale(rows in class()) {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mut prev = usize::MAX;
        for eps in [0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
            let e = eluder_dimension_finite(&refs, eps, DEFAULT_SEARCH_BUDGET).unwrap();
            prop_assert!(e <= prev, "E grew from {} to {} at {}", prev, e, eps);
            prop_assert!(e <= rows[0].len());
            prev = e;
        }
    }

    #[test]
    fn eluder_ignores_duplicate_functions(rows in class(), eps in 0.01f64..1.0) {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mut doubled = refs.clone();
        doubled.extend(refs.iter().copied());
        prop_assert_eq!(
            eluder_dimension_finite(&refs, eps, DEFAULT_SEARCH_BUDGET).unwrap(),
            eluder_dimension_finite(&doubled, eps, DEFAULT_SEARCH_BUDGET).unwrap()
        );
    }
}

#[test]
fn checkers_are_pure_functions_of_the_trace() {
    let cfg = ExperimentConfig::from_preset("linear_ball", 2, 300, 4).unwrap();
    let out = run_safe_learning(&cfg).unwrap();
    let widths: Vec<f64> = out.records.iter().map(|r| r.width_at_action).collect();
    let e = |eps: f64| linear_eluder(2, eps, 4.0);
    let a = violation_count_report(&widths, cfg.radius(), 4.0, &epsilon_grid(), &e);
    let b = violation_count_report(&widths, cfg.radius(), 4.0, &epsilon_grid(), &e);
    assert_eq!(a, b);
    let w1 = check_width_sum_bound(&widths, cfg.radius(), &alpha_grid(), &e);
    let w2 = check_width_sum_bound(&widths, cfg.radius(), &alpha_grid(), &e);
    assert_eq!(w1, w2);
}

#[test]
fn noiseless_run_respects_the_violation_count_bound() {
    let mut cfg = ExperimentConfig::from_preset("linear_ball", 2, 500, 9).unwrap();
    cfg.environment.noise_std = 0.0;
    let out = run_safe_learning(&cfg).unwrap();
    let widths: Vec<f64> = out.records.iter().map(|r| r.width_at_action).collect();
    let e = |eps: f64| linear_eluder(2, eps, cfg.analysis.c_eluder);
    assert!(violation_count_report(&widths, cfg.radius(), 4.0, &epsilon_grid(), &e).holds());
}
