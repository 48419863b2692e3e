//! Property-based invariants for the lattice geometry and windowed metrics.

use mdimkit::lattice::{ball_points, shell, LatticePoint, LatticeSet};
use mdimkit::systems::metric::{window_distance, MetricParams};
use mdimkit::systems::{ShiftSystem, SystemSpec};
use proptest::prelude::*;

fn small_set(k: usize) -> impl Strategy<Value = LatticeSet> {
    prop::collection::btree_set((-6i64..6, -6i64..6), 1..12).prop_map(move |pts| {
        LatticeSet::from_points(
            k,
            pts.into_iter().map(|(a, b)| LatticePoint(vec![a, b])),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shell_interior_antimonotone_in_radius(omega in small_set(2), r1 in 1u8..3, r2 in 1u8..3) {
        let (ra, rb) = (r1.min(r2) as f64, r1.max(r2) as f64);
        let (_, int_a) = shell(&omega, ra).unwrap();
        let (_, int_b) = shell(&omega, rb).unwrap();
        // Larger R: smaller interior.
        prop_assert!(int_b.is_subset(&int_a));
    }

    #[test]
    fn shell_translation_equivariant(omega in small_set(2), ax in -5i64..5, ay in -5i64..5) {
        let a = LatticePoint(vec![ax, ay]);
        let (b1, i1) = shell(&omega, 1.5).unwrap();
        let (b2, i2) = shell(&omega.translate(&a), 1.5).unwrap();
        prop_assert_eq!(b1.translate(&a), b2);
        prop_assert_eq!(i1.translate(&a), i2);
    }

    #[test]
    fn shell_subadditive_over_unions(o1 in small_set(2), o2 in small_set(2)) {
        let union = o1.union(&o2);
        let (bu, _) = shell(&union, 1.0).unwrap();
        let (b1, _) = shell(&o1, 1.0).unwrap();
        let (b2, _) = shell(&o2, 1.0).unwrap();
        prop_assert!(bu.len() <= b1.len() + b2.len());
    }

    #[test]
    fn ball_points_nested(r1 in 0.0f64..4.0, r2 in 0.0f64..4.0) {
        let (ra, rb) = (r1.min(r2), r1.max(r2));
        let small = ball_points(ra, 2).unwrap();
        let big = ball_points(rb, 2).unwrap();
        prop_assert!(small.is_subset(&big));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn window_metric_shift_equivariant(seed in 0u64..500, a in -4i64..4) {
        // d_{a+Omega}(x, y) = d_Omega(T^a x, T^a y), exactly.
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 3, seed)).unwrap();
        let window = mdimkit::lattice::cube_window(30, 1).unwrap();
        let x = sys.sample(&window, 0).unwrap();
        let y = sys.sample(&window, 1).unwrap();
        let omega = mdimkit::lattice::cube_window(4, 1)
            .unwrap()
            .translate(&LatticePoint(vec![10]));
        let params = MetricParams::new(2.0, 1.0);

        let shifted_omega = omega.translate(&LatticePoint(vec![a]));
        let lhs = window_distance(&x, &y, &shifted_omega, &params).unwrap();
        let sx = x.shift(&LatticePoint(vec![a]));
        let sy = y.shift(&LatticePoint(vec![a]));
        let rhs = window_distance(&sx, &sy, &omega, &params).unwrap();
        prop_assert_eq!(lhs.value, rhs.value);
    }

    #[test]
    fn window_metric_monotone_in_omega(seed in 0u64..500) {
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 2, seed)).unwrap();
        let window = mdimkit::lattice::cube_window(30, 1).unwrap();
        let x = sys.sample(&window, 2).unwrap();
        let y = sys.sample(&window, 3).unwrap();
        let params = MetricParams::new(2.0, 1.0);
        let small = mdimkit::lattice::cube_window(3, 1)
            .unwrap()
            .translate(&LatticePoint(vec![12]));
        let big = mdimkit::lattice::cube_window(7, 1)
            .unwrap()
            .translate(&LatticePoint(vec![10]));
        prop_assume!(small.is_subset(&big));
        let d_small = window_distance(&x, &y, &small, &params).unwrap();
        let d_big = window_distance(&x, &y, &big, &params).unwrap();
        prop_assert!(d_small.value <= d_big.value);
    }
}
