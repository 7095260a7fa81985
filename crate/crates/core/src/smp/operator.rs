use std::fmt;
use std::sync::Arc;

use crate::brackets::VectorFieldExpr;
use crate::calculus::{Compiled, Expr, Rational};
use crate::error::{Error, Result};
use crate::geometry::{conorm_squared, MeanCurvature, SubriemannianStructure};
use crate::heisenberg::{
    cylinder_structure, intrinsic_chart_structure, intrinsic_graph_operator, la_chart_structure, la_graph_operator,
    radial_cylinder_operator, theorem_f_structure, GraphCurvature, GraphOperatorHF,
};

/// Curvature operator applied to graph functions over a chart.
///
/// Every variant describes graphs `x^{m+1} = u(x)` of an ambient structure:
/// the generic engine on any structure (graph direction = last coordinate),
/// `H_F` on the graph structure of `F`, the `l_a` and intrinsic graph
/// operators of `H_n`, and radial profiles `z = u(r)` in the Heisenberg
/// cylinder.
#[derive(Clone, Debug)]
pub enum GraphOperator {
    Generic { structure: Arc<SubriemannianStructure>, p: Rational },
    GraphHF { f: Vec<Expr> },
    Intrinsic { n: usize },
    LaGraph { n: usize },
    RadialCylinder { n: usize },
}

impl fmt::Display for GraphOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphOperator::Generic { structure, p } => write!(f, "generic(p={p}) on {}", structure.name),
            GraphOperator::GraphHF { f: fs } => write!(f, "graph_HF(m={})", fs.len()),
            GraphOperator::Intrinsic { n } => write!(f, "intrinsic(n={n})"),
            GraphOperator::LaGraph { n } => write!(f, "la_graph(n={n})"),
            GraphOperator::RadialCylinder { n } => write!(f, "radial_cylinder(n={n})"),
        }
    }
}

/// Curvature of one graph function, ready for pointwise evaluation.
#[derive(Clone, Debug)]
pub enum CompiledCurvature {
    Generic { curvature: MeanCurvature, u: Compiled },
    Graph(GraphCurvature),
    HF(GraphOperatorHF),
}

impl CompiledCurvature {
    pub fn eval(&self, x: &[f64], eps: f64) -> Result<f64> {
        match self {
            CompiledCurvature::Generic { curvature, u } => {
                let mut full = x.to_vec();
                full.push(u.eval(x)?);
                curvature.eval(&full, eps)
            }
            CompiledCurvature::Graph(g) => g.eval(x, eps),
            CompiledCurvature::HF(h) => h.eval(x, eps),
        }
    }
}

impl GraphOperator {
    /// Dimension `m` of the graph chart.
    pub fn chart_dim(&self) -> usize {
        match self {
            GraphOperator::Generic { structure, .. } => structure.dim() - 1,
            GraphOperator::GraphHF { f } => f.len(),
            GraphOperator::Intrinsic { n } | GraphOperator::LaGraph { n } => 2 * n,
            GraphOperator::RadialCylinder { .. } => 1,
        }
    }

    /// Dimension of the graph hypersurface in the ambient structure.
    pub fn surface_dim(&self) -> usize {
        match self {
            GraphOperator::RadialCylinder { n } => 2 * n,
            _ => self.chart_dim(),
        }
    }

    pub fn p(&self) -> Rational {
        match self {
            GraphOperator::Generic { p, .. } => *p,
            _ => Rational::from_integer(0),
        }
    }

    pub fn curvature(&self, u: &Expr) -> Result<CompiledCurvature> {
        self.check_graph_fn(u)?;
        Ok(match self {
            GraphOperator::Generic { structure, p } => {
                let phi = &u.clone() - &Expr::var(structure.dim() - 1);
                CompiledCurvature::Generic { curvature: MeanCurvature::new(structure, &phi, *p)?, u: Compiled::new(u) }
            }
            GraphOperator::GraphHF { f } => CompiledCurvature::HF(GraphOperatorHF::new(f, u)?),
            GraphOperator::Intrinsic { n } => CompiledCurvature::Graph(intrinsic_graph_operator(u, *n)?),
            GraphOperator::LaGraph { n } => CompiledCurvature::Graph(la_graph_operator(u, *n)?),
            GraphOperator::RadialCylinder { n } => CompiledCurvature::Graph(radial_cylinder_operator(u, *n)?),
        })
    }

    /// Squared quantity whose vanishing marks singular points of the graph,
    /// as an expression over the chart.
    pub fn singular_measure(&self, u: &Expr) -> Result<Expr> {
        self.check_graph_fn(u)?;
        Ok(match self {
            GraphOperator::Generic { structure, .. } => {
                let m = structure.dim() - 1;
                let phi = &u.clone() - &Expr::var(m);
                let sq = conorm_squared(structure, &phi);
                let mut values: Vec<Expr> = (0..m).map(Expr::var).collect();
                values.push(u.clone());
                sq.compose(&values)
            }
            GraphOperator::GraphHF { f } => GraphOperatorHF::new(f, u)?.norm_squared,
            GraphOperator::Intrinsic { n } => intrinsic_graph_operator(u, *n)?.guard_squared,
            GraphOperator::LaGraph { n } => la_graph_operator(u, *n)?.guard_squared,
            GraphOperator::RadialCylinder { n } => radial_cylinder_operator(u, *n)?.guard_squared,
        })
    }

    fn check_graph_fn(&self, u: &Expr) -> Result<()> {
        let m = self.chart_dim();
        if u.max_var().is_some_and(|v| v >= m) {
            return Err(Error::InvalidArgument(format!("graph function depends on coordinate {} of a {m}-dim chart", u.max_var().unwrap_or(0) + 1)));
        }
        Ok(())
    }

    /// Ambient structure in which the graph is a hypersurface.
    pub fn ambient_structure(&self) -> Result<SubriemannianStructure> {
        match self {
            GraphOperator::Generic { structure, .. } => Ok((**structure).clone()),
            GraphOperator::GraphHF { f } => theorem_f_structure(f, f.len()),
            GraphOperator::Intrinsic { n } => intrinsic_chart_structure(*n),
            GraphOperator::LaGraph { n } => la_chart_structure(*n),
            GraphOperator::RadialCylinder { n } => cylinder_structure(*n),
        }
    }

    /// Defining function `φ` of the graph of `u` in ambient coordinates.
    pub fn lift_function(&self, u: &Expr) -> Expr {
        match self {
            GraphOperator::RadialCylinder { n } => {
                let r = crate::heisenberg::r2_expr(*n).powr(1, 2);
                &u.compose(&[r]) - &Expr::var(2 * n)
            }
            _ => &u.clone() - &Expr::var(self.chart_dim()),
        }
    }

    /// Point of the graph of `u` over the chart point `x` (`u_value = u(x)`).
    pub fn lift_point(&self, x: &[f64], u_value: f64) -> Vec<f64> {
        match self {
            GraphOperator::RadialCylinder { n } => {
                let mut p = vec![0.0; 2 * n + 1];
                p[0] = x[0];
                p[2 * n] = u_value;
                p
            }
            _ => {
                let mut p = x.to_vec();
                p.push(u_value);
                p
            }
        }
    }

    /// Chart point under an ambient point.
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        match self {
            GraphOperator::RadialCylinder { n } => vec![p[..2 * n].iter().map(|v| v * v).sum::<f64>().sqrt()],
            _ => p[..self.chart_dim()].to_vec(),
        }
    }

    /// Fields spanning `ξ ∩ TΣ` for the graph of `u`.
    pub fn tangent_fields(&self, u: &Expr) -> Result<Vec<VectorFieldExpr>> {
        let s = self.ambient_structure()?;
        crate::brackets::tangent_distribution_fields(&s, &self.lift_function(u))
    }
}
