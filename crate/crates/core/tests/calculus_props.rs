mod common;

use common::{coords3, expr_source, parse3, point3, rel_close};
use proptest::prelude::*;
use subcurv::calculus::{differentiate, evaluate, parse_expr, unparse, Expr};

fn central(e: &Expr, x: &[f64], i: usize, h: f64) -> f64 {
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[i] += h;
    b[i] -= h;
    (evaluate(e, &a).unwrap() - evaluate(e, &b).unwrap()) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_central_differences(src in expr_source(), x in point3(), i in 0usize..3) {
        let e = parse3(&src);
        let d = evaluate(&differentiate(&e, i), &x).unwrap();
        let fd = central(&e, &x, i, 1e-5);
        prop_assert!(rel_close(d, fd, 1e-6), "{src}: d = {d}, fd = {fd}");
    }

    #[test]
    fn parse_unparse_is_a_fixed_point(src in expr_source()) {
        let c = coords3();
        let once = parse_expr(&src, &c).unwrap();
        let text = unparse(&once, &c);
        let twice = parse_expr(&text, &c).unwrap();
        prop_assert_eq!(&once, &twice, "{} -> {}", src, text);
        prop_assert_eq!(unparse(&twice, &c), text);
    }

    #[test]
    fn differentiation_is_linear(a in expr_source(), b in expr_source(), k in -3i64..4, x in point3(), i in 0usize..3) {
        let (e1, e2) = (parse3(&a), parse3(&b));
        let combo = &(&Expr::int(k) * &e1) + &e2;
        let lhs = evaluate(&differentiate(&combo, i), &x).unwrap();
        let d1 = evaluate(&differentiate(&e1, i), &x).unwrap();
        let d2 = evaluate(&differentiate(&e2, i), &x).unwrap();
        let rhs = k as f64 * d1 + d2;
        let scale = (k as f64 * d1).abs().max(d2.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
    }
}

#[test]
fn gauge_derivative_against_finite_differences() {
    let c = subcurv::CoordSystem::new(["x1", "y1", "z"]).unwrap();
    let e = parse_expr("((x1^2 + y1^2)^2 + 4*z^2)^(1/4)", &c).unwrap();
    let closed = parse_expr("x1*(x1^2 + y1^2)*((x1^2 + y1^2)^2 + 4*z^2)^(-3/4)", &c).unwrap();
    let d = differentiate(&e, 0);
    for x in [[0.3, -0.2, 0.5], [1.0, 0.4, -0.7], [-0.6, 0.9, 0.1], [0.2, 0.2, 0.2], [-1.1, -0.3, 0.8]] {
        let v = evaluate(&d, &x).unwrap();
        assert!(rel_close(v, evaluate(&closed, &x).unwrap(), 1e-12));
        assert!(rel_close(v, central(&e, &x, 0, 1e-5), 1e-6));
    }
}
