use std::f64::consts::TAU;

use dotshape::geometry::hausdorff_distance;
use dotshape::{ParametricCurve, Polyline, Vec2};
use proptest::prelude::*;

/// Star-shaped closed polyline with `n` vertices around `center`.
fn star() -> impl Strategy<Value = Polyline> {
    (3usize..14, -1.0f64..1.0, -1.0f64..1.0).prop_flat_map(|(n, cx, cy)| {
        (proptest::collection::vec(0.2f64..2.0, n), proptest::collection::vec(0.0f64..1.0, n)).prop_map(
            move |(radii, jitter)| {
                let pts = (0..n)
                    .map(|i| {
                        let t = TAU * (i as f64 + 0.8 * jitter[i]) / n as f64;
                        Vec2::new(cx, cy) + Vec2::from_polar(radii[i], t)
                    })
                    .collect();
                Polyline::new(pts).unwrap()
            },
        )
    })
}

proptest! {
    #[test]
    fn hausdorff_is_symmetric(a in star(), b in star()) {
        let (ab, ba) = (hausdorff_distance(&a, &b), hausdorff_distance(&b, &a));
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(hausdorff_distance(&a, &a) <= 1e-12);
    }

    #[test]
    fn hausdorff_triangle_inequality(a in star(), b in star(), c in star()) {
        let ac = hausdorff_distance(&a, &c);
        let via = hausdorff_distance(&a, &b) + hausdorff_distance(&b, &c);
        prop_assert!(ac <= via + 1e-12, "{ac} > {via}");
    }

    #[test]
    fn perimeter_is_rigid_invariant(p in star(), angle in -7.0f64..7.0, tx in -5.0f64..5.0, ty in -5.0f64..5.0) {
        let moved = p.transformed(angle, Vec2::new(tx, ty));
        prop_assert!((moved.perimeter() - p.perimeter()).abs() <= 1e-12);
        prop_assert!((moved.signed_area() - p.signed_area()).abs() <= 1e-11);
    }

    #[test]
    fn sampled_curves_converge_in_hausdorff(b in 0.0f64..0.1, m in 2u32..6) {
        let curve = ParametricCurve::cosine_star(5.0, 0.4, b, m);
        let coarse = curve.sample(200).unwrap();
        let fine = curve.sample(800).unwrap();
        // Chordal error of a smooth curve sampled at spacing s is O(s²).
        prop_assert!(hausdorff_distance(&coarse, &fine) < 5e-3);
    }
}
