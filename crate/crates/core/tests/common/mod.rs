#![allow(dead_code)]

use proptest::prelude::*;
use subcurv::calculus::{parse_expr, CoordSystem, Expr};

pub fn coords3() -> CoordSystem {
    CoordSystem::new(["x1", "x2", "x3"]).unwrap()
}

/// Source text of a random polynomial / rational-power expression in
/// `x1, x2, x3`. Rational powers only act on bases bounded below by 1, so
/// every expression is smooth everywhere.
pub fn expr_source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x1".to_string()),
        Just("x2".to_string()),
        Just("x3".to_string()),
        (1i32..5).prop_map(|k| k.to_string()),
        Just("1/2".to_string()),
        Just("3/4".to_string()),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), 2i32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            (inner.clone(), prop_oneof![Just(-2i32), Just(-1), Just(1), Just(3)], 2i32..5)
                .prop_map(|(a, p, q)| format!("(1 + ({a})^2)^({p}/{q})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/(2 + ({b})^2)")),
            inner.prop_map(|a| format!("-({a})")),
        ]
    })
}

pub fn point3() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 3)
}

pub fn parse3(s: &str) -> Expr {
    parse_expr(s, &coords3()).unwrap()
}

/// Random polynomial of total degree <= 3 in `vars` variables (source text).
pub fn cubic_source(vars: usize) -> impl Strategy<Value = String> {
    let monomials: Vec<Vec<usize>> = {
        let mut out = vec![vec![]];
        for d in 1..=3 {
            let mut next = Vec::new();
            fn rec(start: usize, left: usize, vars: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if left == 0 {
                    out.push(cur.clone());
                    return;
                }
                for v in start..vars {
                    cur.push(v);
                    rec(v, left - 1, vars, cur, out);
                    cur.pop();
                }
            }
            rec(0, d, vars, &mut Vec::new(), &mut next);
            out.extend(next);
        }
        out
    };
    let n = monomials.len();
    proptest::collection::vec(-2i32..=2, n).prop_map(move |coeffs| {
        let terms: Vec<String> = coeffs
            .iter()
            .zip(&monomials)
            .filter(|(c, _)| **c != 0)
            .map(|(c, m)| {
                let mut t = format!("({c})");
                for v in m {
                    t.push_str(&format!("*x{}", v + 1));
                }
                t
            })
            .collect();
        if terms.is_empty() { "0".to_string() } else { terms.join(" + ") }
    })
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
