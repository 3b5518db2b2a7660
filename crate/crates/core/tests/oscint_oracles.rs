use std::f64::consts::TAU;

use approx::assert_relative_eq;
use caplab_core::oscint::{g_sum, m0, m_k, m_kn, sigma_hat, sigma_hat_fixed, LocalCurve};
use caplab_core::{ConvexBoundary, Error, Family, GraphCurve};
use proptest::prelude::*;

fn bodies() -> Vec<ConvexBoundary> {
    vec![
        ConvexBoundary::circle(1.0).unwrap(),
        ConvexBoundary::ellipse(2.0, 1.0).unwrap(),
        ConvexBoundary::flat_spot(Family::Power { m: 4.0 }, None).unwrap(),
        ConvexBoundary::flat_spot(Family::ExpFlat { a: 1.0 }, None).unwrap(),
    ]
}

#[test]
fn adaptive_transform_matches_a_dense_fixed_rule() {
    for b in bodies() {
        for (r, a) in [(0.0, 0.0), (3.0, 0.2), (57.0, 1.1), (200.0, 4.0)] {
            let xi = [r * f64::cos(a), r * f64::sin(a)];
            let got = sigma_hat(&b, xi, 1e-11).unwrap().value;
            let want = sigma_hat_fixed(&b, xi, 16 * 1024);
            assert!((got - want).norm() < 1e-8, "{} at {xi:?}: {got} vs {want}", b.label());
        }
    }
}

#[test]
fn transform_is_bounded_by_the_perimeter() {
    for b in bodies() {
        let top = sigma_hat(&b, [0.0, 0.0], 1e-12).unwrap().value;
        assert_relative_eq!(top.re, b.perimeter(), max_relative = 1e-12);
        for i in 1..40 {
            let xi = [0.7 * i as f64, -1.3 * i as f64];
            assert!(sigma_hat(&b, xi, 1e-10).unwrap().value.norm() <= b.perimeter());
        }
    }
}

#[test]
fn tight_tolerances_are_refused() {
    let c = ConvexBoundary::circle(1.0).unwrap();
    assert!(matches!(sigma_hat(&c, [1.0, 0.0], 1e-14), Err(Error::Precondition(_))));
}

#[test]
fn dilation_identity() {
    let l = LocalCurve::new(GraphCurve::power(4.0).unwrap());
    for k in [-3, 0, 5, 9] {
        let xi = [0.37, -1.9];
        let s = 2f64.powi(k);
        let a = m_k(&l, k, xi).unwrap();
        let b = m0(&l, [s * xi[0], s * xi[1]]).unwrap();
        assert!((a - b).norm() <= 1e-12);
    }
}

#[test]
fn first_partial_multiplier_has_the_trivial_bound() {
    let c = GraphCurve::exp_flat(1.0).unwrap();
    let k = c.k_circ() + 4;
    let t = c.partition(k).unwrap();
    let cap = 1.0 / c.weight(k).unwrap();
    for i in 0..20 {
        let xi = [100.0 * i as f64, -30.0 * i as f64];
        let v = m_kn(&c, k, 0, xi).unwrap().norm();
        assert!(v <= t.t0 * (1.0 + 1e-12) && t.t0 <= cap * (1.0 + 1e-12));
    }
}

#[test]
fn g_sum_tails_are_certified_far_from_the_origin() {
    let l = LocalCurve::circle(1.0).unwrap();
    let g = g_sum(&l, [0.6, 1.1], (-2, 14), 1.0).unwrap();
    assert!(g.certified);
    assert!(g.value.is_finite() && g.lower_tail < 0.01 && g.upper_tail < 0.05);
    assert_eq!(g.terms.len(), 17);
    assert!(g_sum(&l, [0.6, 1.1], (3, 2), 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn circle_transform_is_radial(r in 0.0f64..80.0, a in 0.0f64..TAU, b in 0.0f64..TAU) {
        let c = ConvexBoundary::circle(1.0).unwrap();
        let u = sigma_hat(&c, [r * a.cos(), r * a.sin()], 1e-11).unwrap().value;
        let v = sigma_hat(&c, [r * b.cos(), r * b.sin()], 1e-11).unwrap().value;
        prop_assert!((u - v).norm() < 1e-9);
    }

    #[test]
    fn partial_multipliers_at_zero_are_lengths(k in 1i32..20) {
        let c = GraphCurve::power(4.0).unwrap();
        let t = c.partition(k).unwrap();
        for n in 1..=t.nk {
            let v = m_kn(&c, k, n, [0.0, 0.0]).unwrap();
            prop_assert!((v.re - (t.t[n] - t.t[n - 1])).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }
}
