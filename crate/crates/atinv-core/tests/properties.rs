//! Property suites for the polynomial layer: norm submultiplicativity,
//! variance identities, circle-value bounds, and reflection symmetry.

use atinv_core::laurent::{rat, ExactPoly, FloatPoly, RationalAngle};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;

fn coeff() -> impl Strategy<Value = BigRational> {
    (1i64..=9, 1i64..=9).prop_map(|(n, d)| rat(n, d))
}

fn signed_coeff() -> impl Strategy<Value = BigRational> {
    (-9i64..=9, 1i64..=9).prop_map(|(n, d)| rat(n, d))
}

fn nonneg_poly() -> impl Strategy<Value = ExactPoly> {
    prop::collection::vec((-12i64..=12, coeff()), 1..8).prop_map(ExactPoly::from_pairs)
}

fn signed_poly() -> impl Strategy<Value = ExactPoly> {
    prop::collection::vec((-12i64..=12, signed_coeff()), 0..8).prop_map(ExactPoly::from_pairs)
}

fn unit_poly() -> impl Strategy<Value = ExactPoly> {
    nonneg_poly().prop_map(|p| p.normalized())
}

proptest! {
    #[test]
    fn l1_norm_is_submultiplicative(f in signed_poly(), g in signed_poly()) {
        let prod = f.multiply(&g).l1_norm();
        prop_assert!(prod <= f.l1_norm() * g.l1_norm());
    }

    #[test]
    fn l1_norm_is_multiplicative_for_nonnegative(f in nonneg_poly(), g in nonneg_poly()) {
        prop_assert_eq!(f.multiply(&g).l1_norm(), f.l1_norm() * g.l1_norm());
    }

    #[test]
    fn nonnegative_norm_is_value_at_one(f in nonneg_poly()) {
        prop_assert_eq!(f.l1_norm(), f.mass());
    }

    #[test]
    fn variance_matches_pairwise_form(f in unit_poly()) {
        prop_assert_eq!(f.variance(), f.variance_pairwise());
    }

    #[test]
    fn variance_adds_under_multiplication(f in unit_poly(), g in unit_poly()) {
        let sum = f.variance() + g.variance();
        prop_assert_eq!(f.multiply(&g).variance(), sum);
    }

    #[test]
    fn variance_adds_in_floating_arithmetic(f in unit_poly(), g in unit_poly()) {
        let ff = f.to_float();
        let gf = g.to_float();
        let lhs = ff.multiply(&gf).variance();
        let rhs = ff.variance() + gf.variance();
        prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn variance_is_shift_invariant(f in unit_poly(), shift in -64i64..=64) {
        prop_assert_eq!(f.shift(shift).variance(), f.variance());
    }

    #[test]
    fn variance_dominated_by_extreme_exponent_bound(f in unit_poly()) {
        prop_assert!(f.bhatia_davis_bound() >= f.variance());
    }

    #[test]
    fn circle_values_bounded_by_norm(f in signed_poly(), p in -40i64..=40, q in 1i64..=40) {
        let z = RationalAngle::new(p, q);
        let v = f.eval_at(&z).norm();
        let bound = f.l1_norm().to_f64().unwrap();
        prop_assert!(v <= bound + 1e-12 * (1.0 + bound));
    }

    #[test]
    fn normalized_values_stay_in_unit_disc(f in unit_poly(), p in -40i64..=40, q in 1i64..=40) {
        let z = RationalAngle::new(p, q);
        prop_assert!(f.eval_at(&z).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn opposite_is_an_isometric_involution(f in signed_poly()) {
        let o = f.opposite();
        prop_assert_eq!(o.l1_norm(), f.l1_norm());
        prop_assert_eq!(o.opposite(), f);
    }

    #[test]
    fn exp_distribution_mass_and_sign(coeffs in prop::collection::vec((0i64..=6, 0.01f64..1.5), 1..4)) {
        let h = FloatPoly::from_pairs(coeffs);
        let tol = 1e-10;
        let e = atinv_core::laurent::exp_distribution(&h, tol);
        prop_assert!(e.is_nonnegative());
        let mass = e.mass();
        prop_assert!(mass <= 1.0 + 1e-12 && mass >= 1.0 - tol - 1e-12);
    }
}

#[test]
fn zero_poly_edge_cases() {
    let z = ExactPoly::zero();
    assert!(z.l1_norm().is_zero());
    assert!(z.multiply(&z).is_zero_poly());
    assert!(z.opposite().is_zero_poly());
    assert_eq!(z.moment(1), rat(0, 1));
    assert!(!rat(-1, 2).is_positive());
}
