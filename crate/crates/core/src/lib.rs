//! Horizontal p-mean curvature in subriemannian manifolds, Lie-bracket rank
//! checks, and a strong-maximum-principle comparison harness.

pub mod brackets;
pub mod calculus;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod heisenberg;
pub mod smp;

pub use brackets::{bracket_generate_rank, lie_bracket, RankReport, VectorFieldExpr};
pub use calculus::{differentiate, evaluate, parse_expr, CoordSystem, Expr, Rational};
pub use error::{Error, EvalError, ExprError, Result};
pub use geometry::{conorm, p_mean_curvature, raise_covector, singular_scan, ScalarField, SubriemannianStructure};
pub use grid::{DomainBox, GridSpec};
