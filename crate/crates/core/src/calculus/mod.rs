//! Symbolic expressions in named coordinates: parsing, exact differentiation,
//! shallow simplification and pointwise evaluation.

mod diff;
mod eval;
mod expr;
mod number;
mod parse;

pub use diff::{differentiate, gradient};
pub use eval::{evaluate, Compiled};
pub use expr::{CoordSystem, Expr, ExprDisplay, Node};
pub use number::{Number, Rational};
pub use parse::{parse_constant, parse_expr, parse_expr_with, Macros};

/// Renders `e` in the input grammar.
pub fn unparse(e: &Expr, coords: &CoordSystem) -> String {
    e.display(coords).to_string()
}
