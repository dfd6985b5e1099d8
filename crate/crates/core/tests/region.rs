use entswitch::analytic::{extremes_b1, FARTHEST_POLICY};
use entswitch::region::{sweep, Engine};
use entswitch::SwitchConfig;
use proptest::prelude::*;

#[test]
fn capacities_scale_with_mu() {
    let base = sweep(SwitchConfig::new(4, 1.0, 0.2, 2), 0.1, Engine::Ctmc).unwrap();
    let scaled = sweep(SwitchConfig::new(4, 7.0, 1.4, 2), 0.1, Engine::Ctmc).unwrap();
    for (a, b) in base.points.iter().zip(&scaled.points) {
        assert!((7.0 * a.c2 - b.c2).abs() <= 1e-12 * b.c2.max(1.0));
        assert!((7.0 * a.c3 - b.c3).abs() <= 1e-12 * b.c3.max(1.0));
    }
    assert!((base.areas.ratio - scaled.areas.ratio).abs() <= 1e-12);
}

#[test]
fn farthest_grid_point_is_the_predicted_policy() {
    for k in [3, 4, 5, 7, 10, 20, 50] {
        let r = sweep(SwitchConfig::new(k, 1.0, 0.0, 1), 0.05, Engine::Analytic).unwrap();
        assert_eq!(r.farthest_point.policy, FARTHEST_POLICY, "k={k}");
    }
}

#[test]
fn grid_maxima_match_closed_forms() {
    for k in [3, 10, 50] {
        let cfg = SwitchConfig::new(k, 1.0, 0.0, 1);
        let r = sweep(cfg, 0.05, Engine::Ctmc).unwrap();
        let e = extremes_b1(cfg).unwrap();
        assert!((r.max_c2() - e.c2_max).abs() <= 1e-12 * e.c2_max);
        assert!((r.max_c3() - e.c3_max).abs() <= 1e-12 * e.c3_max);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn frontier_is_pareto_and_monotone(k in 3u32..30, alpha in 0.0f64..1.0, b in 1u8..=2) {
        let r = sweep(SwitchConfig::new(k, 1.0, alpha, b), 0.25, Engine::Ctmc).unwrap();
        for w in r.upper_boundary.windows(2) {
            prop_assert!(w[1].c3 > w[0].c3);
            prop_assert!(w[1].c2 < w[0].c2);
        }
        for p in &r.points {
            let bound = r.frontier_at(p.c3).unwrap();
            prop_assert!(p.c2 <= bound + 1e-12);
        }
    }
}
