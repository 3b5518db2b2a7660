use approx::assert_relative_eq;
use caplab_core::criterion::{cap_integral, omega_weight};
use caplab_core::curve::trend_slope;
use caplab_core::{ConvexBoundary, CurveSpec, Family, GraphCurve};
use proptest::prelude::*;

#[test]
fn power_weights_are_explicit() {
    let c = GraphCurve::power(4.0).unwrap();
    for k in 1..40 {
        assert_relative_eq!(c.weight(k).unwrap(), 2f64.powf(k as f64 / 4.0), max_relative = 1e-12);
    }
}

#[test]
fn partitions_end_at_the_domain_end() {
    for c in [GraphCurve::power(3.0).unwrap(), GraphCurve::exp_flat(2.0).unwrap(), GraphCurve::iter_exp_flat(1, 1.0, 1.0).unwrap()] {
        for k in c.k_circ() + 1..c.k_circ() + 25 {
            let p = c.partition(k).unwrap();
            assert_eq!(p.t.len(), p.nk + 1);
            assert_eq!(*p.t.last().unwrap(), c.domain_end());
            assert!(p.t.windows(2).all(|w| w[0] < w[1]));
            assert!(p.rho.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(c.partition(c.k_circ()).is_err());
    }
}

#[test]
fn trend_of_a_power_law() {
    let trace: Vec<(i32, f64)> = (3..20).map(|k| (k, 5.0 * 2f64.powf(-0.25 * k as f64))).collect();
    assert_relative_eq!(trend_slope(&trace), -0.25, epsilon = 1e-12);
}

#[test]
fn flat_direction_integrand_follows_the_flatness() {
    // at the flat normal Λ(δ) = 2 (ln 1/δ)^{-1/a}
    let a = 1.5;
    let b = ConvexBoundary::flat_spot(Family::ExpFlat { a }, None).unwrap();
    let d = 1e-10;
    let l = b.lambda([0.0, -1.0], d).unwrap();
    assert_relative_eq!(l, 2.0 * (1.0 / d as f64).ln().powf(-1.0 / a), max_relative = 1e-6);
    let r = cap_integral(&b, [0.0, -1.0], 2.0, 1e-3, 1e-12).unwrap();
    assert_relative_eq!(r.slope, 1.0 - 2.0 / a, epsilon = 0.02);
}

#[test]
fn omega_weight_of_an_ellipse_is_set_by_the_flattest_point() {
    let e = ConvexBoundary::ellipse(2.0, 1.0).unwrap();
    let k = 16;
    let w = omega_weight(&e, k, 0.5, 180).unwrap();
    // near the vertex (0, ±1) the curve is y ≈ 1 - x²/8, so Λ ≈ 2√(8δ)
    let want = 1.0 / (2.0 * (8.0 * 2f64.powi(-k)).sqrt());
    assert_relative_eq!(w, want, max_relative = 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_inverse_round_trip(m in 2.2f64..8.0, u in 0.001f64..1.0) {
        let c = GraphCurve::power(m).unwrap();
        let t = u * c.domain_end();
        let s = c.eval(t, 0).unwrap();
        prop_assert!((c.gamma_inverse(s).unwrap() - t).abs() <= 1e-9 * t);
        let s2 = c.eval(t, 2).unwrap();
        prop_assert!((c.gamma2_inverse(s2).unwrap() - t).abs() <= 1e-9 * t);
    }

    #[test]
    fn flat_inverse_round_trip(a in 0.5f64..3.0, u in 0.05f64..1.0) {
        let c = GraphCurve::exp_flat(a).unwrap();
        let t = u * c.domain_end();
        let s = c.eval(t, 0).unwrap();
        prop_assume!(s > 1e-300);
        prop_assert!((c.gamma_inverse(s).unwrap() - t).abs() <= 1e-9 * t);
        let h = c.h_eval(t).unwrap();
        prop_assert!((c.h_inverse(h).unwrap() - t).abs() <= 1e-9 * t);
    }

    #[test]
    fn weights_increase_with_k(a in 0.5f64..3.0) {
        let c = GraphCurve::exp_flat(a).unwrap();
        let k0 = c.k_circ() + 1;
        let w: Vec<f64> = (k0..k0 + 30).map(|k| c.weight(k).unwrap()).collect();
        prop_assert!(w.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn curve_spec_round_trip(m in 2.1f64..9.0, end in 0.1f64..1.0) {
        let c = GraphCurve::power(m).unwrap().with_domain_end(end).unwrap();
        let s = CurveSpec::from_curve(&c);
        let back = CurveSpec::from_toml(&s.to_toml().unwrap()).unwrap().build().unwrap();
        prop_assert_eq!(back, c);
    }
}
