mod common;

use common::{cubic_source, expr_source, point3, rel_close};
use proptest::prelude::*;
use subcurv::calculus::{evaluate, parse_expr, Expr, Rational};
use subcurv::geometry::{conorm_squared, normalized_difference_identity, MeanCurvature, DEFAULT_EPS_SING};
use subcurv::heisenberg::{graph_operator_hf, numbered_coords, standard_structure, theorem_f_structure, default_f};
use subcurv::{conorm, p_mean_curvature};

fn p_of(k: i64) -> Rational {
    Rational::new(k, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sign_flip_negates_curvature(src in expr_source(), x in point3(), k in 0i64..4) {
        let s = standard_structure(1).unwrap();
        let phi = common::parse3(&src);
        let a = p_mean_curvature(&s, &phi, p_of(k), &x, DEFAULT_EPS_SING);
        let b = p_mean_curvature(&s, &phi.neg(), p_of(k), &x, DEFAULT_EPS_SING);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!(rel_close(a, -b, 1e-12), "{a} vs {b}"),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn level_sets_do_not_depend_on_the_constant(src in expr_source(), x in point3(), c in -3i64..4) {
        let s = standard_structure(1).unwrap();
        let phi = common::parse3(&src);
        let shifted = &phi - &Expr::int(c);
        let a = p_mean_curvature(&s, &phi, Rational::from_integer(0), &x, DEFAULT_EPS_SING);
        let b = p_mean_curvature(&s, &shifted, Rational::from_integer(0), &x, DEFAULT_EPS_SING);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn conorm_is_nonnegative_and_even(src in expr_source(), x in point3()) {
        let s = standard_structure(1).unwrap();
        let phi = common::parse3(&src);
        let sq = evaluate(&conorm_squared(&s, &phi), &x).unwrap();
        prop_assert!(sq >= 0.0);
        let a = conorm(&s, &phi, &x).unwrap();
        let b = conorm(&s, &phi.neg(), &x).unwrap();
        prop_assert!(rel_close(a, b, 1e-14), "{a} vs {b}");
    }

    #[test]
    fn normalized_difference_identity_holds(
        b in proptest::collection::vec(-1.0f64..1.0, 16),
        w in proptest::collection::vec(-2.0f64..2.0, 4),
        e in proptest::collection::vec(-2.0f64..2.0, 4),
    ) {
        let g: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| (0..4).map(|k| b[4 * i + k] * b[4 * j + k]).sum()).collect())
            .collect();
        if let Ok((lhs, rhs)) = normalized_difference_identity(&g, &w, &e) {
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1e-300), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn engine_matches_graph_operator(src in cubic_source(2), x in proptest::collection::vec(-1.0f64..1.0, 2)) {
        let f = default_f(2).unwrap();
        let s = theorem_f_structure(&f, 2).unwrap();
        let u = parse_expr(&src, &numbered_coords(2).unwrap()).unwrap();
        let phi = &u - &Expr::var(2);
        let full = [x[0], x[1], evaluate(&u, &x).unwrap()];
        let direct = graph_operator_hf(&f, &u, &x, 1e-3);
        let engine = MeanCurvature::new(&s, &phi, Rational::from_integer(0)).unwrap().eval(&full, 1e-3);
        match (direct, engine) {
            (Ok(a), Ok(b)) => prop_assert!(rel_close(a, b, 1e-8), "{src}: {a} vs {b}"),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }
}

#[test]
fn horizontal_plane_examples() {
    let s = standard_structure(1).unwrap();
    let c = &s.coords;
    let phi = parse_expr("1 - z", c).unwrap();
    for x in [[0.5, 0.2, 0.0], [-0.3, 0.7, 1.0]] {
        assert_eq!(p_mean_curvature(&s, &phi, Rational::from_integer(0), &x, DEFAULT_EPS_SING).unwrap(), 0.0);
        assert!(rel_close(conorm(&s, &phi, &x).unwrap(), (x[0] * x[0] + x[1] * x[1]).sqrt(), 1e-15));
    }
    assert!(p_mean_curvature(&s, &phi, Rational::from_integer(0), &[0.0, 0.0, 0.3], DEFAULT_EPS_SING).is_err());
}
