//! Structural properties over randomized systems and inputs.

use proptest::prelude::*;

use liencycle::cycles::normalize_system;
use liencycle::flow::{crossing_indicator, LienardField};
use liencycle::model::{filippov, glo, SystemSpec};

fn arb_quintic() -> impl Strategy<Value = SystemSpec> {
    // a in (0, 4], b < -2*sqrt(a), c in [0, 2]: the two-zero shape
    (0.01f64..=4.0, 0.01f64..=3.0, 0.0f64..=2.0)
        .prop_map(|(a, u, c)| glo(a, -2.0 * a.sqrt() - u, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f_is_odd_and_big_g_is_even(s in arb_quintic(), x in -8.0f64..8.0) {
        let f = s.eval_big_f(x);
        prop_assert!((s.eval_big_f(-x) + f).abs() <= 1e-12 * f.abs().max(1.0));
        let g = s.eval_big_g(x);
        prop_assert!((s.eval_big_g(-x) - g).abs() <= 1e-12 * g.abs().max(1.0));
        prop_assert!(g >= 0.0);
    }

    #[test]
    fn energy_splits_into_potential_plus_kinetic(
        s in arb_quintic(),
        x in -8.0f64..8.0,
        y in -5.0f64..5.0,
    ) {
        let e = s.eval_energy(x, y);
        prop_assert!((e - s.eval_big_g(x) - 0.5 * y * y).abs() <= 1e-12 * e.abs().max(1.0));
    }

    #[test]
    fn discontinuous_g_keeps_sign_and_oddness(
        a in 0.01f64..=4.0,
        u in 0.01f64..=3.0,
        c in 0.0f64..=2.0,
        x in -8.0f64..8.0,
    ) {
        let s = filippov(a, -2.0 * a.sqrt() - u, c).unwrap();
        let g = s.eval_g(x);
        prop_assert!((s.eval_g(-x) + g).abs() <= 1e-12 * g.abs().max(1.0));
        if x != 0.0 {
            prop_assert!(x * g > 0.0);
        }
    }

    #[test]
    fn crossing_indicator_positive_off_the_origin(s in arb_quintic(), y in -5.0f64..5.0) {
        let delta = crossing_indicator(&s, y);
        prop_assert!(delta >= 0.0);
        if y != 0.0 {
            prop_assert!(delta > 0.0); // crossing, never sliding
        }
    }

    #[test]
    fn normalizing_map_is_odd_increasing_and_invertible(
        s in arb_quintic(),
        x in 0.001f64..7.9,
    ) {
        let n = normalize_system(&s);
        let u = n.h(x);
        prop_assert!(u > 0.0);
        prop_assert!((n.h(-x) + u).abs() <= 1e-10 * u.max(1.0));
        prop_assert!(n.h(x * 1.01 + 1e-6) > u);
        let back = n.h_inv(u);
        prop_assert!((back - x).abs() <= 1e-8 * x.max(1.0), "{x} -> {u} -> {back}");
        // the normalized restoring force is the identity
        prop_assert_eq!(n.g_side(u, 1.0), u);
    }
}
