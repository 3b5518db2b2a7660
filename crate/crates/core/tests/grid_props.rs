use approx::assert_relative_eq;
use caplab_core::grid::{
    avg_ak, curve_max, hyperbolic_growth, lacunary_max, opnorm_lower, pk_project, random_bandlimited, square_function,
    strip_test, Ensemble, Field2D, MeasureSource, StripSpec,
};
use caplab_core::oscint::LocalCurve;
use caplab_core::{ConvexBoundary, Error, GraphCurve};
use proptest::prelude::*;

fn shift(f: &Field2D, dr: usize, dc: usize) -> Field2D {
    let n = f.n();
    let mut data = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            data[((r + dr) % n) * n + (c + dc) % n] = f.get(r, c);
        }
    }
    Field2D::from_vec(n, f.side(), data).unwrap()
}

#[test]
fn lacunary_max_dominates_each_average() {
    let c = ConvexBoundary::ellipse(1.0, 0.5).unwrap();
    let f = random_bandlimited(64, 8.0, 10, 4).unwrap();
    let src = MeasureSource::Body(&c);
    let m = lacunary_max(&f, src, -3, 0).unwrap();
    for k in -3..=0 {
        let a = avg_ak(&f, src, k).unwrap();
        assert!(a.data().iter().zip(m.data()).all(|(x, y)| x.abs() <= y + 1e-12));
    }
    assert!(matches!(lacunary_max(&f, src, 1, 0), Err(Error::EmptyRange(_))));
    assert!(matches!(lacunary_max(&f, src, 0, 1), Err(Error::Scale { k: 1 })));
}

#[test]
fn averages_of_positive_fields_are_bounded_by_mass_times_max() {
    let c = ConvexBoundary::circle(1.0).unwrap();
    let f = random_bandlimited(64, 8.0, 6, 1).unwrap().map(f64::abs);
    let a = avg_ak(&f, MeasureSource::Body(&c), 0).unwrap();
    let top = f.lp_norm(f64::INFINITY) * c.perimeter();
    assert!(a.data().iter().all(|v| *v >= -1e-12 && *v <= top * (1.0 + 1e-12)));
}

#[test]
fn field_files_round_trip() {
    let f = random_bandlimited(32, 1.0, 5, 11).unwrap();
    let path = std::env::temp_dir().join(format!("caplab-grid-{}.capf", std::process::id()));
    f.save(&path).unwrap();
    let g = Field2D::load(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(f.data(), g.data());
    assert!(Field2D::from_vec(32, 1.0, vec![0.0; 10]).is_err());
    assert!(Field2D::zeros(48, 1.0).is_err());
}

#[test]
fn single_weight_square_function_is_one_projection() {
    let g = GraphCurve::power(4.0).unwrap();
    let src = MeasureSource::Graph {
        curve: &g,
        a: 0.0,
        b: 1.0,
        normalized: false,
    };
    let f = random_bandlimited(64, 4.0, 20, 8).unwrap();
    let s = square_function(&f, src, &[(3, 2.5)], 2.0).unwrap();
    let af = avg_ak(&f, src, 0).unwrap();
    let p = pk_project(&af, 3).unwrap();
    for (x, y) in s.sf.data().iter().zip(p.data()) {
        assert_relative_eq!(*x, 2.5 * y.abs(), epsilon = 1e-10);
    }
}

#[test]
fn curve_max_of_a_positive_field_dominates_the_longest_average() {
    let g = GraphCurve::exp_flat(1.0).unwrap();
    let f = random_bandlimited(64, 2.0, 8, 3).unwrap();
    let (m, radii) = curve_max(&f, &g).unwrap();
    let src = MeasureSource::Graph {
        curve: &g,
        a: 0.0,
        b: radii[0],
        normalized: true,
    };
    let a = avg_ak(&f.map(f64::abs), src, 0).unwrap();
    assert!(a.data().iter().zip(m.data()).all(|(x, y)| *x <= y + 1e-12));
}

#[test]
fn strip_test_on_a_small_grid() {
    let local = LocalCurve::new(GraphCurve::power(4.0).unwrap()).with_aperture(0.5, 1.0 / 16.0).unwrap();
    let spec = StripSpec {
        q: 2.0,
        n: 256,
        eta_cells: 8,
        k_offsets: (0, 2),
    };
    let r = strip_test(&local, &spec).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert!(r.disjoint);
    assert!(r.rows.iter().all(|row| row.points > 0 && row.fraction_ok >= 0.95));
    assert!(r.rows.windows(2).all(|w| w[1].partial_sum > w[0].partial_sum));
    let thin = StripSpec { eta_cells: 4, ..spec };
    assert!(matches!(strip_test(&local, &thin), Err(Error::Resolution(_))));
}

#[test]
fn opnorm_lower_bound_is_positive_and_finite() {
    let c = ConvexBoundary::circle(1.0).unwrap();
    let ens = Ensemble {
        n: 64,
        side: 16.0,
        seed: 1,
        random_fields: 2,
        band: 6,
    };
    let r = opnorm_lower(MeasureSource::Body(&c), 2.0, &ens).unwrap();
    assert!(r.estimate.is_finite() && r.estimate > 0.0);
    assert!(r.k_range.0 <= r.k_range.1);
}

#[test]
fn hyperbolic_growth_is_monotone() {
    let g = hyperbolic_growth(64, 6, 1.0, 3, 2).unwrap();
    assert_eq!(g.estimates.len(), 7);
    assert!(g.estimates.windows(2).all(|w| w[1] >= w[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn averages_commute_with_grid_shifts(dr in 0usize..32, dc in 0usize..32, seed in 0u64..1000) {
        let c = ConvexBoundary::ellipse(1.0, 0.6).unwrap();
        let src = MeasureSource::Body(&c);
        let f = random_bandlimited(32, 8.0, 6, seed).unwrap();
        let a = shift(&avg_ak(&f, src, -1).unwrap(), dr, dc);
        let b = avg_ak(&shift(&f, dr, dc), src, -1).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn projections_have_norm_at_most_one(k in 0i32..6, seed in 0u64..1000) {
        let f = random_bandlimited(32, 1.0, 12, seed).unwrap();
        let p = pk_project(&f, k).unwrap();
        prop_assert!(p.lp_norm(2.0) <= f.lp_norm(2.0) * (1.0 + 1e-12));
    }
}
