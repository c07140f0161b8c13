use proptest::prelude::*;

use qbl_core::equilibria::{full_census, verify_configuration};
use qbl_core::model::{eval_field, eval_jacobian, eval_rotated_field, rotation_determinants};
use qbl_core::{ModelParams, PhasePoint};

fn quartic() -> impl Strategy<Value = ModelParams> {
    (0.05f64..4.0, 0.0f64..1.0, 0.05f64..1.5, 0.2f64..2.5, 0.05f64..2.0).prop_filter_map(
        "pole-free",
        |(a, t, d, l, m)| {
            // β spans (-2√α, 1)
            let b = -2.0 * a.sqrt() * (1.0 - t) + t;
            ModelParams::new(a, b, d, l, m).ok()
        },
    )
}

fn point() -> impl Strategy<Value = PhasePoint> {
    (-2.0f64..3.0, -2.0f64..3.0).prop_map(|(x, y)| PhasePoint::new(x, y))
}

proptest! {
    #[test]
    fn axes_are_invariant(p in quartic(), s in -3.0f64..3.0) {
        prop_assert_eq!(eval_field(&p, PhasePoint::new(0.0, s)).dx, 0.0);
        prop_assert_eq!(eval_field(&p, PhasePoint::new(s, 0.0)).dy, 0.0);
    }

    #[test]
    fn rotation_scales_speed(p in quartic(), g in -3.0f64..3.0, pt in point()) {
        let p = p.with_gamma(g).unwrap();
        let (f, r) = (eval_field(&p, pt), eval_rotated_field(&p, pt));
        let want = f.norm() * (1.0 + g * g).sqrt();
        prop_assert!((r.norm() - want).abs() <= 1e-12 * (1.0 + want));
    }

    #[test]
    fn determinant_identities(p in quartic(), pt in point()) {
        let d = rotation_determinants(&p, pt);
        prop_assert!(d.d_gamma >= 0.0);
        prop_assert!((d.d_alpha - pt.x * d.d_beta).abs() <= 1e-12 * (1.0 + d.d_alpha.abs()));
    }

    #[test]
    fn rotated_linearisation_at_equilibria(p in quartic(), g in -2.0f64..2.0) {
        let c = full_census(&p).unwrap();
        let pr = p.with_gamma(g).unwrap();
        for e in &c.finite {
            let (j, jr) = (eval_jacobian(&p, e.location, false), eval_jacobian(&pr, e.location, true));
            let s = 1.0 + j.trace().abs() + (j.pxy - j.qyx).abs();
            // trace is affine in γ, determinant scales by 1 + γ²
            prop_assert!((jr.trace() - (j.trace() + g * (j.pxy - j.qyx))).abs() <= 1e-12 * s);
            let det = j.determinant() * (1.0 + g * g);
            prop_assert!((jr.determinant() - det).abs() <= 1e-10 * (1.0 + det.abs()));
            let f = eval_rotated_field(&pr, e.location);
            prop_assert!(f.norm() <= 1e-9 * (1.0 + e.location.norm()));
        }
    }

    #[test]
    fn simple_censuses_satisfy_index_identity(p in quartic()) {
        let c = full_census(&p).unwrap();
        prop_assume!(c.all_finite_simple());
        let r = verify_configuration(&c);
        prop_assert!(r.index_identity.is_pass(), "{:?}", r.index_identity);
    }
}
