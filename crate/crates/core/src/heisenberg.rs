//! Heisenberg groups, the standard and cylinder structures, graph structures
//! `[[I, −F], [−Fᵀ, |F|²]]`, and the explicit curvature operators for graphs.
//!
//! Coordinates of `H_n` are `x1..xn, y1..yn, z` with group law
//! `(a,b,c)∘(x,y,z) = (a+x, b+y, c+z+Σ(b_j x_j − a_j y_j))`, frames
//! `ê_j = ∂x_j + y_j ∂z`, `ê_j' = ∂y_j − x_j ∂z` and contact form
//! `Θ = dz + Σ(x_j dy_j − y_j dx_j)`.
//!
//! The chart used for `l_a` graphs and intrinsic graphs has coordinates
//! `eta2..eta{2n}, tau, x1` (graph direction last).

use crate::brackets::VectorFieldExpr;
use crate::calculus::{differentiate, Compiled, CoordSystem, Expr, Macros};
use crate::error::{Error, Result};
use crate::geometry::SubriemannianStructure;

/// Largest `n` accepted by the builtin constructors.
pub const MAX_N: usize = 4;

fn check_n(n: usize) -> Result<()> {
    if !(1..=MAX_N).contains(&n) {
        return Err(Error::InvalidArgument(format!("n = {n} outside 1..={MAX_N}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergPoint {
    pub n: usize,
    /// `x1..xn, y1..yn, z`.
    pub coords: Vec<f64>,
}

impl HeisenbergPoint {
    pub fn new(n: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 || coords.len() != 2 * n + 1 {
            return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: coords.len() });
        }
        Ok(Self { n, coords })
    }

    pub fn origin(n: usize) -> Self {
        Self { n, coords: vec![0.0; 2 * n + 1] }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.coords[j]
    }

    pub fn y(&self, j: usize) -> f64 {
        self.coords[self.n + j]
    }

    pub fn z(&self) -> f64 {
        self.coords[2 * self.n]
    }

    pub fn inverse(&self) -> Self {
        Self { n: self.n, coords: self.coords.iter().map(|v| -v).collect() }
    }

    /// `r² = Σ x_j² + y_j²`.
    pub fn r2(&self) -> f64 {
        self.coords[..2 * self.n].iter().map(|v| v * v).sum()
    }

    /// Gauge `ρ = (r⁴ + 4z²)^{1/4}`.
    pub fn rho(&self) -> f64 {
        let r2 = self.r2();
        (r2 * r2 + 4.0 * self.z() * self.z()).powf(0.25)
    }
}

pub fn group_mul(a: &HeisenbergPoint, b: &HeisenbergPoint) -> Result<HeisenbergPoint> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch { expected: 2 * a.n + 1, got: 2 * b.n + 1 });
    }
    let n = a.n;
    let mut c: Vec<f64> = a.coords.iter().zip(&b.coords).map(|(p, q)| p + q).collect();
    c[2 * n] += (0..n).map(|j| a.y(j) * b.x(j) - a.x(j) * b.y(j)).sum::<f64>();
    Ok(HeisenbergPoint { n, coords: c })
}

#[derive(Clone, Debug, PartialEq)]
pub enum IsometryKind {
    LeftTranslation(HeisenbergPoint),
    /// Left translation by `(a, 0, …, 0)`.
    LaTranslation(f64),
    /// `(x, y, z) ↦ (λx, λy, λ²z)`.
    Dilation(f64),
    /// `x1 ↦ y1`, `y1 ↦ −x1`, other coordinates fixed.
    RotationSwap,
}

impl IsometryKind {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            IsometryKind::LeftTranslation(g) if g.n != n => {
                Err(Error::DimensionMismatch { expected: 2 * n + 1, got: 2 * g.n + 1 })
            }
            IsometryKind::Dilation(l) if *l == 0.0 || !l.is_finite() => {
                Err(Error::InvalidArgument(format!("dilation factor {l} must be finite and nonzero")))
            }
            IsometryKind::LaTranslation(a) if !a.is_finite() => {
                Err(Error::InvalidArgument(format!("translation parameter {a} must be finite")))
            }
            _ => Ok(()),
        }
    }

    /// The map as coordinate expressions over `x1..xn, y1..yn, z`, suitable
    /// for pulling back functions with [`Expr::compose`].
    pub fn coordinate_map(&self, n: usize) -> Result<Vec<Expr>> {
        self.validate(n)?;
        let v = |i: usize| Expr::var(i);
        let out = match self {
            IsometryKind::LeftTranslation(g) => {
                let mut m: Vec<Expr> = (0..2 * n).map(|i| &Expr::float(g.coords[i]) + &v(i)).collect();
                let twist = Expr::sum(
                    (0..n).map(|j| &(&Expr::float(g.y(j)) * &v(j)) - &(&Expr::float(g.x(j)) * &v(n + j))),
                );
                m.push(Expr::sum([Expr::float(g.z()), v(2 * n), twist]));
                m
            }
            IsometryKind::LaTranslation(a) => {
                let a = Expr::float(*a);
                let mut m: Vec<Expr> = (0..=2 * n).map(v).collect();
                m[0] = &v(0) + &a;
                m[2 * n] = &v(2 * n) - &(&a * &v(n));
                m
            }
            IsometryKind::Dilation(l) => {
                let l = Expr::float(*l);
                let mut m: Vec<Expr> = (0..2 * n).map(|i| &l * &v(i)).collect();
                m.push(&l.powi(2) * &v(2 * n));
                m
            }
            IsometryKind::RotationSwap => {
                let mut m: Vec<Expr> = (0..=2 * n).map(v).collect();
                m[0] = v(n);
                m[n] = -v(0);
                m
            }
        };
        Ok(out)
    }
}

pub fn apply_isometry(k: &IsometryKind, q: &HeisenbergPoint) -> Result<HeisenbergPoint> {
    k.validate(q.n)?;
    let n = q.n;
    match k {
        IsometryKind::LeftTranslation(g) => group_mul(g, q),
        IsometryKind::LaTranslation(a) => {
            let mut g = HeisenbergPoint::origin(n);
            g.coords[0] = *a;
            group_mul(&g, q)
        }
        IsometryKind::Dilation(l) => {
            let mut c: Vec<f64> = q.coords.iter().map(|v| l * v).collect();
            c[2 * n] = l * l * q.z();
            Ok(HeisenbergPoint { n, coords: c })
        }
        IsometryKind::RotationSwap => {
            let mut c = q.coords.clone();
            c[0] = q.y(0);
            c[n] = -q.x(0);
            Ok(HeisenbergPoint { n, coords: c })
        }
    }
}

/// `x1..xn, y1..yn, z`.
pub fn heisenberg_coords(n: usize) -> Result<CoordSystem> {
    check_n(n)?;
    let names = (1..=n)
        .map(|j| format!("x{j}"))
        .chain((1..=n).map(|j| format!("y{j}")))
        .chain(std::iter::once("z".to_string()));
    Ok(CoordSystem::new(names)?)
}

/// `r² = Σ(x_j² + y_j²)` over the first `2n` coordinates.
pub fn r2_expr(n: usize) -> Expr {
    Expr::sum((0..2 * n).map(|i| Expr::var(i).powi(2)))
}

/// `ρ = (r⁴ + 4z²)^{1/4}`.
pub fn rho_expr(n: usize) -> Expr {
    (&r2_expr(n).powi(2) + &(&Expr::int(4) * &Expr::var(2 * n).powi(2))).powr(1, 4)
}

/// `r2`, `rho`, and for `n = 1` the aliases `x`, `y`.
pub fn heisenberg_macros(n: usize) -> Macros {
    let mut m = Macros::new();
    m.insert("r2".into(), r2_expr(n));
    m.insert("rho".into(), rho_expr(n));
    if n == 1 {
        m.insert("x".into(), Expr::var(0));
        m.insert("y".into(), Expr::var(1));
    }
    m
}

/// `ê_1..ê_n, ê_1'..ê_n'`.
pub fn heisenberg_frames(n: usize) -> Vec<VectorFieldExpr> {
    let dim = 2 * n + 1;
    let mut frames = Vec::with_capacity(2 * n);
    for j in 0..n {
        let mut c = vec![Expr::zero(); dim];
        c[j] = Expr::one();
        c[2 * n] = Expr::var(n + j);
        frames.push(VectorFieldExpr::new(c));
    }
    for j in 0..n {
        let mut c = vec![Expr::zero(); dim];
        c[n + j] = Expr::one();
        c[2 * n] = -Expr::var(j);
        frames.push(VectorFieldExpr::new(c));
    }
    frames
}

/// Coefficients of `Θ = dz + Σ(x_j dy_j − y_j dx_j)`.
pub fn contact_form(n: usize) -> Vec<Expr> {
    let mut c = vec![Expr::zero(); 2 * n + 1];
    for j in 0..n {
        c[j] = -Expr::var(n + j);
        c[n + j] = Expr::var(j);
    }
    c[2 * n] = Expr::one();
    c
}

/// `H_n` with its left-invariant frames and density 1.
pub fn standard_structure(n: usize) -> Result<SubriemannianStructure> {
    let coords = heisenberg_coords(n)?;
    SubriemannianStructure::from_frames(format!("heisenberg({n})"), coords, heisenberg_frames(n), Expr::one())?
        .with_null_coforms(vec![contact_form(n)])
        .map(|s| s.with_macros(heisenberg_macros(n)))
}

/// Heisenberg cylinder `(H_n \ {0}, ρ⁻²Θ)`: frames `ρ ê_I`, density `ρ^{−(2n+2)}`.
pub fn cylinder_structure(n: usize) -> Result<SubriemannianStructure> {
    let coords = heisenberg_coords(n)?;
    let rho = rho_expr(n);
    let frames = heisenberg_frames(n).iter().map(|e| e.scale(&rho)).collect();
    let density = rho.powi(-(2 * n as i64 + 2));
    let contact: Vec<Expr> = contact_form(n).iter().map(|c| c * &rho.powi(-2)).collect();
    SubriemannianStructure::from_frames(format!("cylinder({n})"), coords, frames, density)?
        .with_null_coforms(vec![contact])
        .map(|s| s.with_macros(heisenberg_macros(n)))
}

/// `x1..x{count}`.
pub fn numbered_coords(count: usize) -> Result<CoordSystem> {
    Ok(CoordSystem::chart((1..=count).map(|i| format!("x{i}")))?)
}

/// `F = (−x2, x1, −x4, x3, …)` for even `m`.
pub fn default_f(m: usize) -> Result<Vec<Expr>> {
    if m == 0 || m % 2 != 0 {
        return Err(Error::InvalidArgument(format!("default F needs even m >= 2, got {m}")));
    }
    Ok((0..m).map(|j| if j % 2 == 0 { -Expr::var(j + 1) } else { Expr::var(j - 1) }).collect())
}

fn check_f(f: &[Expr], m: usize) -> Result<()> {
    if f.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: f.len() });
    }
    if let Some(v) = f.iter().filter_map(Expr::max_var).max() {
        if v >= m {
            return Err(Error::InvalidArgument(format!("F depends on x{}; only x1..x{m} allowed", v + 1)));
        }
    }
    Ok(())
}

/// Graph structure on `R^{m+1}`: frames `e_j = ∂_j − F_j ∂_{m+1}`, cometric
/// `[[I, −F], [−Fᵀ, |F|²]]`, density 1, null coframe `dx^{m+1} + Σ F_j dx^j`.
pub fn theorem_f_structure(f: &[Expr], m: usize) -> Result<SubriemannianStructure> {
    check_f(f, m)?;
    let coords = numbered_coords(m + 1)?;
    let frames = (0..m)
        .map(|j| {
            let mut c = vec![Expr::zero(); m + 1];
            c[j] = Expr::one();
            c[m] = -&f[j];
            VectorFieldExpr::new(c)
        })
        .collect();
    let mut null = f.to_vec();
    null.push(Expr::one());
    SubriemannianStructure::from_frames(format!("graph_F({m})"), coords, frames, Expr::one())?.with_null_coforms(vec![null])
}

/// Legendrian normal `N_F = (∇u + F)/|∇u + F|` and `|∇u + F|²`.
pub fn legendrian_normal(f: &[Expr], u: &Expr) -> (Vec<Expr>, Expr) {
    let w: Vec<Expr> = f.iter().enumerate().map(|(j, fj)| &differentiate(u, j) + fj).collect();
    let sq = Expr::sum(w.iter().map(|c| c.powi(2)));
    let inv = sq.powr(-1, 2);
    (w.iter().map(|c| c * &inv).collect(), sq)
}

/// Compiled graph operator `H_F(u) = div((∇u + F)/|∇u + F|)` on `R^m`.
#[derive(Clone, Debug)]
pub struct GraphOperatorHF {
    pub m: usize,
    pub normal: Vec<Expr>,
    pub norm_squared: Expr,
    pub value: Expr,
    norm_tape: Compiled,
    value_tape: Compiled,
}

impl GraphOperatorHF {
    pub fn new(f: &[Expr], u: &Expr) -> Result<Self> {
        let m = f.len();
        check_f(f, m)?;
        if u.max_var().is_some_and(|v| v >= m) {
            return Err(Error::InvalidArgument(format!("u must depend on x1..x{m} only")));
        }
        let (normal, norm_squared) = legendrian_normal(f, u);
        let value = Expr::sum(normal.iter().enumerate().map(|(j, n)| differentiate(n, j)));
        Ok(Self {
            m,
            norm_tape: Compiled::new(&norm_squared),
            value_tape: Compiled::new(&value),
            normal,
            norm_squared,
            value,
        })
    }

    pub fn norm(&self, point: &[f64]) -> Result<f64> {
        Ok(self.norm_tape.eval(point)?.max(0.0).sqrt())
    }

    pub fn eval(&self, point: &[f64], eps: f64) -> Result<f64> {
        let c = self.norm(point)?;
        if c < eps {
            return Err(Error::SingularPoint { eps, conorm: c });
        }
        Ok(self.value_tape.eval(point)?)
    }
}

pub fn graph_operator_hf(f: &[Expr], u: &Expr, point: &[f64], eps: f64) -> Result<f64> {
    if point.len() != f.len() {
        return Err(Error::DimensionMismatch { expected: f.len(), got: point.len() });
    }
    GraphOperatorHF::new(f, u)?.eval(point, eps)
}

/// `eta2..eta{2n}, tau, x1`.
pub fn graph_chart_coords(n: usize) -> Result<CoordSystem> {
    check_n(n)?;
    let names = (2..=2 * n)
        .map(|k| format!("eta{k}"))
        .chain(["tau".to_string(), "x1".to_string()]);
    Ok(CoordSystem::new(names)?)
}

/// `eta2..eta{2n}, tau` (the parameter domain of a graph).
pub fn graph_parameter_coords(n: usize) -> Result<CoordSystem> {
    Ok(graph_chart_coords(n)?.prefix(2 * n)?)
}

/// Index of `η^k` in the chart.
fn eta(k: usize) -> usize {
    k - 2
}

fn tau(n: usize) -> usize {
    2 * n - 1
}

/// Frame `∂_{η^k} + coeff ∂_τ` on the `(η, τ[, x1])` chart of dimension `dim`.
fn eta_field(dim: usize, n: usize, k: usize, coeff: Expr) -> VectorFieldExpr {
    let mut c = vec![Expr::zero(); dim];
    c[eta(k)] = Expr::one();
    c[tau(n)] = coeff;
    VectorFieldExpr::new(c)
}

/// The frames `e̊_j, e̊_{n+j}` for `2 <= j <= n` on a chart of dimension `dim`.
fn shared_chart_frames(dim: usize, n: usize) -> (Vec<VectorFieldExpr>, Vec<VectorFieldExpr>) {
    let lower = (2..=n).map(|j| eta_field(dim, n, j, Expr::var(eta(n + j)))).collect();
    let upper = (2..=n).map(|j| eta_field(dim, n, n + j, -Expr::var(eta(j)))).collect();
    (lower, upper)
}

fn chart_structure(n: usize, name: &str, e1: VectorFieldExpr, en1: VectorFieldExpr, theta_x1: Expr, theta_eta: Expr) -> Result<SubriemannianStructure> {
    let coords = graph_chart_coords(n)?;
    let dim = 2 * n + 1;
    let (lower, upper) = shared_chart_frames(dim, n);
    let mut frames = vec![e1];
    frames.extend(lower);
    frames.push(en1);
    frames.extend(upper);
    let mut theta = vec![Expr::zero(); dim];
    theta[tau(n)] = Expr::one();
    theta[2 * n] = theta_x1;
    theta[eta(n + 1)] = theta_eta;
    for j in 2..=n {
        theta[eta(n + j)] = Expr::var(eta(j));
        theta[eta(j)] = -Expr::var(eta(n + j));
    }
    SubriemannianStructure::from_frames(format!("{name}({n})"), coords, frames, Expr::one())?.with_null_coforms(vec![theta])
}

/// `H_n` in the `l_a`-invariant chart `η^k = x^k`, `τ = z + x¹x^{n+1}`.
pub fn la_chart_structure(n: usize) -> Result<SubriemannianStructure> {
    check_n(n)?;
    let dim = 2 * n + 1;
    let mut e1 = vec![Expr::zero(); dim];
    e1[2 * n] = Expr::one();
    e1[tau(n)] = &Expr::int(2) * &Expr::var(eta(n + 1));
    let en1 = eta_field(dim, n, n + 1, Expr::zero());
    let theta_x1 = &Expr::int(-2) * &Expr::var(eta(n + 1));
    chart_structure(n, "la_chart", VectorFieldExpr::new(e1), en1, theta_x1, Expr::zero())
}

/// `H_n` in the intrinsic-graph chart `η^k = x^k`, `τ = z − x¹x^{n+1}`.
pub fn intrinsic_chart_structure(n: usize) -> Result<SubriemannianStructure> {
    check_n(n)?;
    let dim = 2 * n + 1;
    let e1 = VectorFieldExpr::coordinate(dim, 2 * n);
    let en1 = eta_field(dim, n, n + 1, &Expr::int(-2) * &Expr::var(2 * n));
    let theta_eta = &Expr::int(2) * &Expr::var(2 * n);
    chart_structure(n, "intrinsic_chart", e1, en1, Expr::zero(), theta_eta)
}

fn check_graph_fn(u: &Expr, n: usize) -> Result<()> {
    check_n(n)?;
    if u.max_var().is_some_and(|v| v >= 2 * n) {
        return Err(Error::InvalidArgument("graph function may only depend on eta2..eta2n, tau".into()));
    }
    Ok(())
}

/// A graph curvature operator reduced to a scalar expression over the
/// parameter chart, with a guard expression that must stay positive.
#[derive(Clone, Debug)]
pub struct GraphCurvature {
    /// Squared norm whose square root is compared against `eps`.
    pub guard_squared: Expr,
    pub value: Expr,
    guard_tape: Compiled,
    value_tape: Compiled,
}

impl GraphCurvature {
    pub fn new(guard_squared: Expr, value: Expr) -> Self {
        Self { guard_tape: Compiled::new(&guard_squared), value_tape: Compiled::new(&value), guard_squared, value }
    }

    pub fn guard(&self, point: &[f64]) -> Result<f64> {
        Ok(self.guard_tape.eval(point)?.max(0.0).sqrt())
    }

    pub fn eval(&self, point: &[f64], eps: f64) -> Result<f64> {
        let g = self.guard(point)?;
        if g < eps {
            return Err(Error::SingularPoint { eps, conorm: g });
        }
        Ok(self.value_tape.eval(point)?)
    }
}

/// Applies the operator `Σ coeff_k ∂_k` given by `op` (over a `2n`-dim chart).
fn apply_op(op: &[Expr], f: &Expr) -> Expr {
    Expr::sum(op.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(k, c)| c * &differentiate(f, k)))
}

fn param_op(n: usize, k: usize, tau_coeff: Expr) -> Vec<Expr> {
    let mut c = vec![Expr::zero(); 2 * n];
    c[eta(k)] = Expr::one();
    c[tau(n)] = tau_coeff;
    c
}

/// `l_a`-graph curvature `W·(W(u−x¹)/|W(u−x¹)|)` with
/// `|W(u−x¹)|² = 1 − 4η^{n+1}∂_τu + |Wu|²`.
pub fn la_graph_operator(u: &Expr, n: usize) -> Result<GraphCurvature> {
    check_graph_fn(u, n)?;
    let y = Expr::var(eta(n + 1));
    let mut e1 = vec![Expr::zero(); 2 * n];
    e1[tau(n)] = &Expr::int(2) * &y;
    let mut ops = vec![e1];
    for j in 2..=n {
        ops.push(param_op(n, j, Expr::var(eta(n + j))));
    }
    ops.push(param_op(n, n + 1, Expr::zero()));
    for j in 2..=n {
        ops.push(param_op(n, n + j, -Expr::var(eta(j))));
    }
    let mut comps: Vec<Expr> = ops.iter().map(|op| apply_op(op, u)).collect();
    comps[0] = &comps[0] - &Expr::one();
    let d2 = Expr::sum(comps.iter().map(|c| c.powi(2)));
    let inv = d2.powr(-1, 2);
    let value = Expr::sum(ops.iter().zip(&comps).map(|(op, c)| apply_op(op, &(c * &inv))));
    Ok(GraphCurvature::new(d2, value))
}

pub fn la_graph_curvature(u: &Expr, n: usize, point: &[f64], eps: f64) -> Result<f64> {
    if point.len() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: point.len() });
    }
    la_graph_operator(u, n)?.eval(point, eps)
}

/// Intrinsic-graph curvature `W^u·(W^u u/√(1+|W^u u|²))` with
/// `e̊^u_{n+1} = ∂_{η^{n+1}} − 2u∂_τ`; `u` is substituted into the operator
/// before differentiation.
pub fn intrinsic_graph_operator(u: &Expr, n: usize) -> Result<GraphCurvature> {
    check_graph_fn(u, n)?;
    let mut ops = Vec::new();
    for j in 2..=n {
        ops.push(param_op(n, j, Expr::var(eta(n + j))));
    }
    ops.push(param_op(n, n + 1, &Expr::int(-2) * u));
    for j in 2..=n {
        ops.push(param_op(n, n + j, -Expr::var(eta(j))));
    }
    let comps: Vec<Expr> = ops.iter().map(|op| apply_op(op, u)).collect();
    let d2 = &Expr::one() + &Expr::sum(comps.iter().map(|c| c.powi(2)));
    let inv = d2.powr(-1, 2);
    let value = Expr::sum(ops.iter().zip(&comps).map(|(op, c)| apply_op(op, &(c * &inv))));
    Ok(GraphCurvature::new(d2, value))
}

pub fn intrinsic_graph_curvature(u: &Expr, n: usize, point: &[f64]) -> Result<f64> {
    if point.len() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: point.len() });
    }
    intrinsic_graph_operator(u, n)?.eval(point, 0.0)
}

/// Coordinate `r` of the one-dimensional radial chart.
pub fn radial_coords() -> CoordSystem {
    CoordSystem::chart(["r"]).expect("valid chart")
}

/// Curvature of `z = u(r)` in the Heisenberg cylinder as a function of `r`:
///
/// ```text
/// H = (ρ/r^{2n−1}) d/dr(u′ r^{2n−1}/√(u′²+r²)) − (2n+1) r²(r u′ − 2u)/(ρ³ √(u′²+r²)),
/// ρ = (r⁴ + 4u²)^{1/4}.
/// ```
pub fn radial_cylinder_operator(u: &Expr, n: usize) -> Result<GraphCurvature> {
    check_n(n)?;
    if u.max_var().is_some_and(|v| v > 0) {
        return Err(Error::InvalidArgument("radial profile may only depend on r".into()));
    }
    let r = Expr::var(0);
    let du = differentiate(u, 0);
    let q = &du.powi(2) + &r.powi(2);
    let qi = q.powr(-1, 2);
    let k = 2 * n as i64 - 1;
    let rho = (&r.powi(4) + &(&Expr::int(4) * &u.powi(2))).powr(1, 4);
    let inner = Expr::product([du.clone(), r.powi(k), qi.clone()]);
    let first = Expr::product([rho.clone(), r.powi(-k), differentiate(&inner, 0)]);
    let second = Expr::product([
        Expr::int(2 * n as i64 + 1),
        r.powi(2),
        &(&r * &du) - &(&Expr::int(2) * u),
        rho.powi(-3),
        qi,
    ]);
    Ok(GraphCurvature::new(q, &first - &second))
}

pub fn radial_cylinder_curvature(u: &Expr, n: usize, r0: f64) -> Result<f64> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidArgument(format!("r0 = {r0} must be positive")));
    }
    radial_cylinder_operator(u, n)?.eval(&[r0], 0.0)
}

/// `2(2n−1)c/(1+4c²)^{1/4}`, the curvature of `z = c r²` in the cylinder.
pub fn paraboloid_curvature(n: usize, c: f64) -> f64 {
    2.0 * (2.0 * n as f64 - 1.0) * c / (1.0 + 4.0 * c * c).powf(0.25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{evaluate, parse_expr, parse_expr_with, Rational};
    use crate::geometry::{conorm, p_mean_curvature, raise_covector, DEFAULT_EPS_SING};

    fn hp(n: usize, c: &[f64]) -> HeisenbergPoint {
        HeisenbergPoint::new(n, c.to_vec()).unwrap()
    }

    #[test]
    fn group_law_examples() {
        let p = group_mul(&hp(1, &[1.0, 0.0, 0.0]), &hp(1, &[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(p.coords, vec![1.0, 1.0, -1.0]);
        let g = hp(1, &[0.3, -0.7, 1.1]);
        assert_eq!(group_mul(&HeisenbergPoint::origin(1), &g).unwrap(), g);
        assert_eq!(group_mul(&g, &g.inverse()).unwrap().coords, vec![0.0; 3]);
        assert!(group_mul(&g, &HeisenbergPoint::origin(2)).is_err());
    }

    #[test]
    fn isometry_examples() {
        let q = apply_isometry(&IsometryKind::LaTranslation(1.0), &HeisenbergPoint::origin(2)).unwrap();
        assert_eq!(q.coords, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = apply_isometry(&IsometryKind::RotationSwap, &hp(1, &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(r.coords, vec![2.0, -1.0, 3.0]);
        assert!(apply_isometry(&IsometryKind::Dilation(0.0), &hp(1, &[1.0, 2.0, 3.0])).is_err());
        let q = hp(1, &[0.4, -0.2, 0.9]);
        let d = apply_isometry(&IsometryKind::Dilation(-2.0), &q).unwrap();
        assert!((d.rho() - 2.0 * q.rho()).abs() < 1e-14);
    }

    #[test]
    fn coordinate_map_matches_point_map() {
        let g = hp(2, &[0.1, -0.4, 0.7, 0.2, -1.3]);
        let q = hp(2, &[1.5, 0.25, -0.5, 0.75, 0.3]);
        for k in [
            IsometryKind::LeftTranslation(g),
            IsometryKind::LaTranslation(-0.6),
            IsometryKind::Dilation(1.7),
            IsometryKind::RotationSwap,
        ] {
            let exact = apply_isometry(&k, &q).unwrap();
            let map = k.coordinate_map(2).unwrap();
            for (e, v) in map.iter().zip(&exact.coords) {
                assert!((evaluate(e, &q.coords).unwrap() - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn standard_cometric_n1() {
        let s = standard_structure(1).unwrap();
        let c = &s.coords;
        let want = [["1", "0", "y1"], ["0", "1", "-x1"], ["y1", "-x1", "x1^2 + y1^2"]];
        let p = [0.3, -1.2, 0.5];
        for l in 0..3 {
            for k in 0..3 {
                let w = evaluate(&parse_expr(want[l][k], c).unwrap(), &p).unwrap();
                assert_eq!(evaluate(&s.cometric()[l][k], &p).unwrap(), w);
            }
        }
        let raised = raise_covector(&s, &contact_form(1)).unwrap();
        assert!(raised.iter().all(Expr::is_zero), "{raised:?}");
        let dz = raise_covector(&s, &[Expr::zero(), Expr::zero(), Expr::one()]).unwrap();
        let vals: Vec<f64> = dz.iter().map(|e| evaluate(e, &p).unwrap()).collect();
        assert_eq!(vals, vec![-1.2, -0.3, 0.3 * 0.3 + 1.2 * 1.2]);
    }

    #[test]
    fn standard_structure_validates() {
        for n in 1..=3 {
            let s = standard_structure(n).unwrap();
            let probe: Vec<f64> = (0..2 * n + 1).map(|i| 0.1 * i as f64 - 0.2).collect();
            s.validate(&[probe]).unwrap();
        }
        assert!(standard_structure(0).is_err());
        assert!(standard_structure(5).is_err());
    }

    #[test]
    fn horizontal_plane_conorm_and_curvature() {
        let s = standard_structure(1).unwrap();
        let phi = parse_expr_with("-z", &s.coords, &s.macros).unwrap();
        assert!((conorm(&s, &phi, &[1.0, 2.0, 0.0]).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(conorm(&s, &phi, &[0.0, 0.0, 0.3]).unwrap(), 0.0);
        let h = p_mean_curvature(&s, &phi, Rational::from_integer(0), &[0.4, 0.2, 1.0], DEFAULT_EPS_SING).unwrap();
        assert!(h.abs() < 1e-14);
    }

    #[test]
    fn sublaplacian_of_r2() {
        let s = standard_structure(1).unwrap();
        let phi = parse_expr_with("x^2 + y^2", &s.coords, &s.macros).unwrap();
        let h = p_mean_curvature(&s, &phi, Rational::from_integer(1), &[0.3, -0.8, 2.0], DEFAULT_EPS_SING).unwrap();
        assert!((h - 4.0).abs() < 1e-12);
    }

    #[test]
    fn paraboloid_in_cylinder_matches_closed_form() {
        let s = cylinder_structure(1).unwrap();
        let phi = parse_expr_with("r2 - z", &s.coords, &s.macros).unwrap();
        let (x, y) = (0.6f64, -0.3f64);
        let z = x * x + y * y;
        let h = p_mean_curvature(&s, &phi, Rational::from_integer(0), &[x, y, z], DEFAULT_EPS_SING).unwrap();
        assert!((h - paraboloid_curvature(1, 1.0)).abs() < 1e-10, "{h}");
        assert!((paraboloid_curvature(1, 1.0) - 1.3374806).abs() < 1e-7);
    }

    #[test]
    fn radial_examples() {
        let r = radial_coords();
        let u = parse_expr("r^2", &r).unwrap();
        assert!((radial_cylinder_curvature(&u, 1, 0.7).unwrap() - 2.0 / 5f64.powf(0.25)).abs() < 1e-12);
        let u = parse_expr("r^2/2", &r).unwrap();
        assert!((radial_cylinder_curvature(&u, 2, 1.3).unwrap() - 3.0 / 2f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(radial_cylinder_curvature(&Expr::zero(), 3, 0.5).unwrap(), 0.0);
        assert!(radial_cylinder_curvature(&u, 2, 0.0).is_err());
    }

    #[test]
    fn hf_examples_vanish() {
        let c = numbered_coords(2).unwrap();
        let f = default_f(2).unwrap();
        for src in ["x1*x2 + x2^2", "x1*x2"] {
            let u = parse_expr(src, &c).unwrap();
            for p in [[1.0, 0.2], [0.7, -0.3], [1.4, 0.5]] {
                let h = graph_operator_hf(&f, &u, &p, DEFAULT_EPS_SING).unwrap();
                assert!(h.abs() < 1e-12, "{src} at {p:?}: {h}");
            }
        }
        let f4 = default_f(4).unwrap();
        let h = graph_operator_hf(&f4, &Expr::zero(), &[0.3, -0.2, 0.5, 0.1], DEFAULT_EPS_SING).unwrap();
        assert!(h.abs() < 1e-12);
        assert!(matches!(
            graph_operator_hf(&f, &Expr::zero(), &[0.0, 0.0], DEFAULT_EPS_SING),
            Err(Error::SingularPoint { .. })
        ));
    }

    #[test]
    fn theorem_f_null_coframe_and_conorm() {
        let f = default_f(2).unwrap();
        let s = theorem_f_structure(&f, 2).unwrap();
        let raised = raise_covector(&s, &s.null_coforms[0]).unwrap();
        assert!(raised.iter().all(Expr::is_zero), "{raised:?}");
        let u = parse_expr("x1*x2", &s.coords).unwrap();
        let phi = &u - &Expr::var(2);
        let c = conorm(&s, &phi, &[0.8, 0.3, 5.0]).unwrap();
        let hf = GraphOperatorHF::new(&f, &u).unwrap();
        assert!((c - hf.norm(&[0.8, 0.3]).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn la_graph_simple_cases() {
        for n in 1..=2 {
            let c = Expr::rational(3, 2);
            let p: Vec<f64> = (0..2 * n).map(|i| 0.3 + 0.1 * i as f64).collect();
            assert!(la_graph_curvature(&c, n, &p, DEFAULT_EPS_SING).unwrap().abs() < 1e-14);
            assert!(la_graph_curvature(&Expr::zero(), n, &p, DEFAULT_EPS_SING).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn intrinsic_simple_cases() {
        for n in 1..=3 {
            let p: Vec<f64> = (0..2 * n).map(|i| -0.4 + 0.2 * i as f64).collect();
            assert_eq!(intrinsic_graph_curvature(&Expr::zero(), n, &p).unwrap(), 0.0);
            let u = &Expr::rational(-5, 4) * &Expr::var(n - 1);
            assert!(intrinsic_graph_curvature(&u, n, &p).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn chart_frames_annihilated_by_contact_form() {
        for s in [la_chart_structure(2).unwrap(), intrinsic_chart_structure(2).unwrap()] {
            let raised = raise_covector(&s, &s.null_coforms[0]).unwrap();
            let p = [0.3, -0.1, 0.7, 0.2, 1.1];
            for e in raised {
                assert!(evaluate(&e, &p).unwrap().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn la_graph_matches_generic_engine() {
        let n = 2;
        let s = la_chart_structure(n).unwrap();
        let params = graph_parameter_coords(n).unwrap();
        let u = parse_expr("eta2*tau + eta3^2 - eta4*eta2 + tau^2/3", &params).unwrap();
        let phi = &u - &Expr::var(2 * n);
        let mc = crate::geometry::MeanCurvature::new(&s, &phi, Rational::from_integer(0)).unwrap();
        let op = la_graph_operator(&u, n).unwrap();
        let p = [0.2, -0.5, 0.3, 0.4];
        let x1 = evaluate(&u, &p).unwrap();
        let full = [p[0], p[1], p[2], p[3], x1];
        let a = mc.eval(&full, DEFAULT_EPS_SING).unwrap();
        let b = op.eval(&p, DEFAULT_EPS_SING).unwrap();
        assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
    }
}
