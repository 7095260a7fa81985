use std::collections::HashMap;

use num_traits::One;

use super::expr::{Expr, Node};

/// Exact partial derivative with respect to coordinate `var`.
pub fn differentiate(e: &Expr, var: usize) -> Expr {
    let mut memo = HashMap::new();
    diff_memo(e, var, &mut memo)
}

/// All first partials, one per coordinate.
pub fn gradient(e: &Expr, dim: usize) -> Vec<Expr> {
    (0..dim).map(|i| differentiate(e, i)).collect()
}

fn diff_memo(e: &Expr, var: usize, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.ptr_id()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(i) => {
            if *i == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Neg(inner) => diff_memo(inner, var, memo).neg(),
        Node::Sum(terms) => Expr::sum(terms.iter().map(|t| diff_memo(t, var, memo)).collect::<Vec<_>>()),
        Node::Product(factors) => {
            let mut terms = Vec::with_capacity(factors.len());
            for (k, f) in factors.iter().enumerate() {
                let df = diff_memo(f, var, memo);
                if df.is_zero() {
                    continue;
                }
                let mut parts: Vec<Expr> = factors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, g)| g.clone())
                    .collect();
                parts.push(df);
                terms.push(Expr::product(parts));
            }
            Expr::sum(terms)
        }
        Node::Pow(base, exp) => {
            let db = diff_memo(base, var, memo);
            if db.is_zero() {
                Expr::zero()
            } else {
                let lowered = Expr::pow(base, exp - super::Rational::one());
                Expr::product([Expr::constant(super::Number::Rational(*exp)), lowered, db])
            }
        }
    };
    memo.insert(e.ptr_id(), d.clone());
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{evaluate, parse_expr, CoordSystem};

    #[test]
    fn power_rule() {
        let c = CoordSystem::new(["x1", "z"]).unwrap();
        let e = parse_expr("x1^2", &c).unwrap();
        assert_eq!(differentiate(&e, 0), parse_expr("2*x1", &c).unwrap());
        assert!(differentiate(&e, 1).is_zero());
    }

    #[test]
    fn gauge_derivative_matches_closed_form() {
        let c = CoordSystem::new(["x1", "y1", "z"]).unwrap();
        let rho = parse_expr("((x1^2+y1^2)^2 + 4*z^2)^(1/4)", &c).unwrap();
        let expected =
            parse_expr("x1*(x1^2+y1^2)*((x1^2+y1^2)^2+4*z^2)^(-3/4)", &c).unwrap();
        let d = differentiate(&rho, 0);
        for p in [[0.3, -0.7, 0.2], [1.1, 0.4, -0.9], [-0.5, 0.5, 1.5]] {
            let a = evaluate(&d, &p).unwrap();
            let b = evaluate(&expected, &p).unwrap();
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn product_and_quotient() {
        let c = CoordSystem::new(["x", "y"]).unwrap();
        let e = parse_expr("x*y/(x+y)", &c).unwrap();
        let d = differentiate(&e, 0);
        // d/dx xy/(x+y) = y^2/(x+y)^2
        let v = evaluate(&d, &[1.0, 2.0]).unwrap();
        assert!((v - 4.0 / 9.0).abs() < 1e-15);
    }
}
