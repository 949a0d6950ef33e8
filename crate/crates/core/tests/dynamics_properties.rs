use moneyflow_core::dynamics::{rhs, resolve_closure};
use moneyflow_core::integrator::{state_closure_residual, ulp};
use moneyflow_core::{InitialSpec, ModelParams, State, Variant};
use proptest::prelude::*;

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Correct), Just(Variant::IlinskiErratum)]
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.0..3.0f64, 0.5..25.0f64, variant()).prop_map(|(a1, a2, v)| ModelParams::new(a1, a2, v).unwrap())
}

fn state() -> impl Strategy<Value = State> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.02..0.98f64).prop_map(|(e, u, r)| State::new(e, u, r))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) + 4.0 * f64::EPSILON
}

proptest! {
    #[test]
    fn closure_identity_within_four_ulps(p in params(), s in state(), c0 in -0.5..0.5f64) {
        let d = rhs(&p, c0, &s).unwrap();
        let (_, ulps) = state_closure_residual(&p, c0, &s, &d);
        prop_assert!(ulps <= 4.0, "{} ulps", ulps);
    }

    #[test]
    fn gauge_shift_leaves_rhs_unchanged(p in params(), s in state(), c0 in -0.5..0.5f64, c in -3.0..3.0f64) {
        let a = rhs(&p, c0, &s).unwrap();
        let b = rhs(&p, c0, &State::new(s.eta + c, s.upsilon - c, s.rho)).unwrap();
        // eta + c + upsilon - c only equals eta + upsilon up to rounding.
        let phase_err = 8.0 * ulp(s.eta.abs() + s.upsilon.abs() + c.abs());
        let slack = phase_err * 50.0;
        prop_assert!((a.rho_prime - b.rho_prime).abs() <= slack);
        prop_assert!((a.eta_prime - b.eta_prime).abs() <= slack * (1.0 + p.alpha1));
        prop_assert!((a.upsilon_prime - b.upsilon_prime).abs() <= slack * (1.0 + a.upsilon_prime.abs()) * 50.0);
    }

    #[test]
    fn currency_swap_negates_rhs(p in params(), s in state(), c0 in -0.5..0.5f64) {
        let p = ModelParams { variant: Variant::Correct, ..p };
        let a = rhs(&p, c0, &s).unwrap();
        let b = rhs(&p, -c0, &State::new(-s.eta, -s.upsilon, 1.0 - s.rho)).unwrap();
        prop_assert!(close(a.rho_prime, -b.rho_prime, 1e-13));
        prop_assert!(close(a.upsilon_prime, -b.upsilon_prime, 1e-13));
        prop_assert!((a.eta_prime + b.eta_prime).abs() <= 1e-13 * (1.0 + p.alpha2 + p.alpha1));
    }

    #[test]
    fn fixed_point_family(p in params(), c in -10.0..10.0f64) {
        let d = rhs(&p, 0.0, &State::new(c, -c, 0.5)).unwrap();
        prop_assert_eq!(d.to_array(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn closure_round_trip(p in params(), s in state(), c0 in -0.5..0.5f64) {
        let (c0a, ep) = resolve_closure(&p, &InitialSpec::with_c0(s, c0)).unwrap();
        let (c0b, epb) = resolve_closure(&p, &InitialSpec::with_eta_prime0(s, ep)).unwrap();
        prop_assert_eq!(c0a, c0);
        prop_assert_eq!(epb, ep);
        prop_assert!((c0b - c0).abs() <= 4.0 * ulp(ep.abs().max(c0.abs()).max(p.alpha2)));
    }

    #[test]
    fn beta_never_enters_the_dynamics(p in params(), s in state(), beta in 0.1..5.0f64) {
        let q = p.with_beta(beta).unwrap();
        prop_assert_eq!(rhs(&p, 0.1, &s).unwrap(), rhs(&q, 0.1, &s).unwrap());
    }
}
