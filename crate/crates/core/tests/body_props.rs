use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use caplab_core::body::{unit, Sign};
use caplab_core::{BodySpec, ConvexBoundary, Family};
use proptest::prelude::*;

fn flat(a: f64) -> ConvexBoundary {
    ConvexBoundary::flat_spot(Family::ExpFlat { a }, None).unwrap()
}

#[test]
fn circle_cap_matches_chord_formula() {
    for r in [0.5, 1.0, 3.0] {
        let c = ConvexBoundary::circle(r).unwrap();
        for d in [1e-10, 1e-4, 0.1, 0.9 * r] {
            // 2r·acos(1 - δ/r) written without cancellation
            let want = 4.0 * r * (d / (2.0 * r)).sqrt().asin();
            assert_relative_eq!(c.lambda(unit(0.3), d).unwrap(), want, max_relative = 1e-9);
        }
    }
}

#[test]
fn ellipse_support_function() {
    let e = ConvexBoundary::ellipse(2.0, 1.0).unwrap();
    for i in 0..24 {
        let a = TAU * i as f64 / 24.0;
        let want = (4.0 * a.cos().powi(2) + a.sin().powi(2)).sqrt();
        assert_relative_eq!(e.support(unit(a), Sign::Plus).offset, want, max_relative = 1e-10);
        assert_relative_eq!(e.width(unit(a)), 2.0 * want, max_relative = 1e-10);
    }
}

#[test]
fn flat_spot_is_flat_in_the_normal_direction() {
    let b = flat(1.0);
    let down = unit(1.5 * PI);
    // γ(t) = exp(-1/t) <= δ exactly when t <= 1/ln(1/δ)
    for d in [1e-6, 1e-9, 1e-12] {
        let want = 2.0 / (1.0 / d as f64).ln();
        let got = b.cap(down, d, Sign::Plus).unwrap().length;
        assert_relative_eq!(got, want, max_relative = 1e-6);
    }
}

#[test]
fn whole_curve_once_delta_reaches_the_width() {
    let e = ConvexBoundary::ellipse(1.5, 1.0).unwrap();
    let th = unit(0.7);
    let cap = e.cap(th, e.width(th), Sign::Plus).unwrap();
    assert!(cap.whole);
    assert_relative_eq!(cap.length, e.perimeter(), max_relative = 1e-12);
}

#[test]
fn caps_on_opposite_sides_are_disjoint_below_delta0() {
    let b = flat(2.0);
    let d0 = b.delta0(180).unwrap();
    assert!(d0 > 0.0);
    for i in 0..12 {
        let th = unit(PI * i as f64 / 12.0);
        let p = b.cap(th, 0.9 * d0, Sign::Plus).unwrap();
        let m = b.cap(th, 0.9 * d0, Sign::Minus).unwrap();
        assert!(!p.intersects(&m, &b));
    }
}

#[test]
fn spec_rejects_unknown_keys_and_missing_parameters() {
    assert!(BodySpec::from_toml("kind = \"circle\"\nradius = 1.0\ncolour = 3").is_err());
    let s = BodySpec::from_toml("kind = \"ellipse\"\nsemi_a = 2.0").unwrap();
    assert!(s.build().is_err());
    assert!(BodySpec::from_toml("kind = \"blob\"").unwrap().build().is_err());
}

#[test]
fn support_function_ellipse_matches_the_parametric_one() {
    let count = 256;
    let (a, b) = (1.3, 0.8);
    let mut h = Vec::new();
    let mut dh = Vec::new();
    for i in 0..count {
        let t = TAU * i as f64 / count as f64;
        let v = (a * a * t.cos().powi(2) + b * b * t.sin().powi(2)).sqrt();
        h.push(v);
        dh.push((b * b - a * a) * t.sin() * t.cos() / v);
    }
    let s = ConvexBoundary::from_support(h, dh).unwrap();
    let e = ConvexBoundary::ellipse(a, b).unwrap();
    assert_relative_eq!(s.perimeter(), e.perimeter(), max_relative = 1e-6);
    let th = unit(0.4);
    assert_relative_eq!(s.lambda(th, 0.05).unwrap(), e.lambda(th, 0.05).unwrap(), max_relative = 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cap_length_grows_with_delta(a in 1.0f64..3.0, b in 0.3f64..1.0, ang in 0.0f64..TAU, d in 1e-8f64..0.5) {
        let e = ConvexBoundary::ellipse(a, b).unwrap();
        let th = unit(ang);
        let small = e.lambda(th, d * 0.5).unwrap();
        let big = e.lambda(th, d).unwrap();
        prop_assert!(small <= big * (1.0 + 1e-12));
        prop_assert!(big <= e.perimeter() * (1.0 + 1e-12));
    }

    #[test]
    fn caps_rotate_with_the_body(phi in 0.0f64..TAU, ang in 0.0f64..TAU, d in 1e-9f64..0.2) {
        let b = flat(1.5);
        let r = b.rotated(phi).unwrap();
        let before = b.lambda(unit(ang), d).unwrap();
        let after = r.lambda(unit(ang + phi), d).unwrap();
        prop_assert!((before - after).abs() <= 1e-7 * before.max(1e-3));
    }

    #[test]
    fn translation_leaves_caps_alone(x in -2.0f64..2.0, y in -2.0f64..2.0, ang in 0.0f64..TAU) {
        let e = ConvexBoundary::ellipse(1.4, 0.9).unwrap();
        let t = e.translated([x, y]).unwrap();
        let th = unit(ang);
        prop_assert!((e.lambda(th, 0.01).unwrap() - t.lambda(th, 0.01).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn body_spec_round_trip(r in 0.1f64..10.0, rot in 0.0f64..TAU) {
        let s = BodySpec { kind: "circle".into(), radius: Some(r), rotation: Some(rot), ..Default::default() };
        let back = BodySpec::from_toml(&s.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert!((back.build().unwrap().perimeter() - TAU * r).abs() < 1e-9 * r);
    }
}
