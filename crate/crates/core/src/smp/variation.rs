use rayon::prelude::*;

use crate::calculus::{gradient, Compiled, Expr};
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_EPS_SING;
use crate::grid::{DomainBox, GridSpec};
use crate::heisenberg::GraphOperatorHF;

/// Largest admissible value of the test function on the box boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Weak-form residual of `H_F(u) = div N_F(u)` against a test function
/// `f` vanishing on the boundary of `domain`:
/// `R = ∫ N_F(u)·∇f + f H_F(u)`, by the midpoint rule on `cells` cells per
/// axis. Returns `|R| / (∫|f| + 1)`.
pub fn variation_check(f_field: &[Expr], u: &Expr, test: &Expr, domain: &DomainBox, cells: usize) -> Result<f64> {
    let m = f_field.len();
    if domain.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: domain.dim() });
    }
    if cells == 0 {
        return Err(Error::InvalidArgument("need at least one cell per axis".into()));
    }
    let op = GraphOperatorHF::new(f_field, u)?;
    let normal: Vec<Compiled> = op.normal.iter().map(Compiled::new).collect();
    let test_tape = Compiled::new(test);
    let grad: Vec<Compiled> = gradient(test, m).iter().map(Compiled::new).collect();

    let nodes = GridSpec::uniform(domain.clone(), cells + 1)?;
    for i in 0..nodes.len() {
        let idx = nodes.multi_index(i);
        let on_boundary = idx.iter().zip(&nodes.counts).any(|(&k, &c)| c > 1 && (k == 0 || k + 1 == c));
        if on_boundary {
            let v = test_tape.eval(&nodes.point(i))?;
            if v.abs() > BOUNDARY_TOLERANCE {
                return Err(Error::InvalidArgument(format!("test function is {v:e} on the boundary")));
            }
        }
    }

    let spacing: Vec<f64> = domain.bounds.iter().map(|(lo, hi)| (hi - lo) / cells as f64).collect();
    let volume: f64 = spacing.iter().product();
    let centers = GridSpec::new(
        DomainBox::new(
            domain.bounds.iter().zip(&spacing).map(|((lo, hi), h)| (lo + 0.5 * h, hi - 0.5 * h)).collect(),
        )?,
        vec![cells; m],
    )?;
    let contributions: Vec<Result<(f64, f64)>> = (0..centers.len())
        .into_par_iter()
        .map(|i| {
            let x = centers.point(i);
            let f = test_tape.eval(&x)?;
            let df: Vec<f64> = grad.iter().map(|g| g.eval(&x)).collect::<Result<_, _>>()?;
            if f == 0.0 && df.iter().all(|d| *d == 0.0) {
                return Ok((0.0, 0.0));
            }
            let h = op.eval(&x, DEFAULT_EPS_SING)?;
            let n: Vec<f64> = normal.iter().map(|c| c.eval(&x)).collect::<Result<_, _>>()?;
            let flux: f64 = n.iter().zip(&df).map(|(a, b)| a * b).sum();
            Ok((flux + f * h, f.abs()))
        })
        .collect();
    let mut residual = 0.0;
    let mut mass = 0.0;
    for c in contributions {
        let (r, a) = c?;
        residual += r;
        mass += a;
    }
    Ok((residual * volume).abs() / (mass * volume + 1.0))
}
