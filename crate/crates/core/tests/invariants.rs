use proptest::prelude::*;

use hyperlab::dendrite::DendritePoint;
use hyperlab::sphere::{ns_map, SpherePoint};
use hyperlab::symbolic::{cone_phi, ConeContinuum, FiniteSupportSequence};

fn sphere_point() -> impl Strategy<Value = SpherePoint> {
    prop_oneof![
        1 => Just(SpherePoint::Infinity),
        19 => (-3.0f64..3.0, 0.0..std::f64::consts::TAU)
            .prop_map(|(e, a)| SpherePoint::finite(10f64.powf(e) * a.cos(), 10f64.powf(e) * a.sin())),
    ]
}

fn sequence() -> impl Strategy<Value = FiniteSupportSequence<u32>> {
    (0u32..4, prop::collection::vec((-20i64..20, 0u32..4), 0..8)).prop_map(|(d, e)| FiniteSupportSequence::new(d, e))
}

proptest! {
    #[test]
    fn chordal_distance_is_a_bounded_metric(x in sphere_point(), y in sphere_point(), z in sphere_point()) {
        let (xy, yx) = (x.chordal(&y), y.chordal(&x));
        prop_assert_eq!(xy, yx);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&xy));
        prop_assert!(x.chordal(&x) == 0.0);
        prop_assert!(x.chordal(&z) <= xy + y.chordal(&z) + 1e-12);
    }

    #[test]
    fn lifted_points_lie_on_the_unit_sphere(x in sphere_point()) {
        let [a, b, c] = x.lift();
        prop_assert!((a * a + b * b + c * c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_map_steps_invert_exactly(x in sphere_point(), d in -30i64..30) {
        prop_assert_eq!(ns_map(ns_map(x, d), -d), x);
        prop_assert_eq!(ns_map(ns_map(x, d), 1), ns_map(x, d + 1));
    }

    #[test]
    fn dendrite_steps_invert_exactly(x in -0.999f64..0.999, d in -50i64..50) {
        let p = DendritePoint::spine(x).unwrap();
        prop_assert_eq!(p.map(d).map(-d), p);
        prop_assert_eq!(p.eval().inverse(), p);
    }

    #[test]
    fn shift_moves_every_coordinate(s in sequence(), d in -10i64..10, n in -40i64..40) {
        let shifted = s.shift_step(d);
        prop_assert_eq!(shifted.get(n), s.get(n + d));
        prop_assert_eq!(shifted.shift_step(-d), s);
    }

    #[test]
    fn cone_coding_conjugates_step_to_shift(h in prop::collection::vec((-15i64..15, 0.0f64..=1.0), 0..6)) {
        let a = ConeContinuum::new(h).unwrap();
        prop_assert_eq!(cone_phi(&a.step()), cone_phi(&a).shift_step(-1));
    }
}
