//! Frame-free subriemannian engine.
//!
//! A structure is a coordinate cometric `g^{lk} = <dx^l, dx^k>*` (symmetric,
//! positive semidefinite, possibly degenerate) and a volume density `A` with
//! `dv = A dx^1 ∧ … ∧ dx^{m+1}`. Raising a covector gives `G(ω)^l = g^{lk} ω_k`
//! and `ω ⌟ dv = ι_{G(ω)} dv`, so the horizontal p-mean curvature defined by
//! `d(dφ / |dφ|*^{1-p} ⌟ dv) = H dv` is the weighted divergence
//!
//! ```text
//! H = A^{-1} Σ_l ∂_l ( A |dφ|*^{p-1} Σ_k g^{lk} ∂_k φ ).
//! ```
//!
//! With this indexing `p = 0` is the mean curvature and `p = 1` the
//! sublaplacian (one less than the usual p-Laplacian exponent).

use num_traits::{One, Signed};
use twofloat::TwoFloat;

use crate::brackets::VectorFieldExpr;
use crate::calculus::{differentiate, gradient, Compiled, CoordSystem, Expr, Macros, Rational};
use crate::error::{Error, Result};
use crate::grid::{DomainBox, GridSpec};

/// Absolute threshold on `|dφ|*` below which a point counts as singular.
pub const DEFAULT_EPS_SING: f64 = 1e-7;

/// Tolerance for the sampled PSD check on leading principal minors.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SubriemannianStructure {
    pub name: String,
    pub coords: CoordSystem,
    cometric: Vec<Vec<Expr>>,
    pub density: Expr,
    /// Dimension of the kernel of the cometric (advisory).
    pub degeneracy: usize,
    pub frames: Option<Vec<VectorFieldExpr>>,
    /// Basis of the annihilator of the horizontal bundle, when known.
    pub null_coforms: Vec<Vec<Expr>>,
    /// Named sub-expressions available to parsers working in this chart.
    pub macros: Macros,
    pub domain: Option<DomainBox>,
}

impl SubriemannianStructure {
    pub fn new(
        name: impl Into<String>,
        coords: CoordSystem,
        cometric: Vec<Vec<Expr>>,
        density: Expr,
        degeneracy: usize,
    ) -> Result<Self> {
        let dim = coords.len();
        if cometric.len() != dim || cometric.iter().any(|row| row.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: cometric.len() });
        }
        for l in 0..dim {
            for k in 0..l {
                if cometric[l][k] != cometric[k][l] {
                    return Err(Error::InvalidStructure(format!(
                        "cometric entries ({}, {}) and ({}, {}) differ",
                        l + 1,
                        k + 1,
                        k + 1,
                        l + 1
                    )));
                }
            }
        }
        if degeneracy >= dim {
            return Err(Error::InvalidStructure(format!("degeneracy {degeneracy} >= dimension {dim}")));
        }
        Ok(Self {
            name: name.into(),
            coords,
            cometric,
            density,
            degeneracy,
            frames: None,
            null_coforms: Vec::new(),
            macros: Macros::new(),
            domain: None,
        })
    }

    /// Structure whose horizontal bundle has the given orthonormal frame:
    /// `g^{lk} = Σ_I E_I^l E_I^k`.
    pub fn from_frames(
        name: impl Into<String>,
        coords: CoordSystem,
        frames: Vec<VectorFieldExpr>,
        density: Expr,
    ) -> Result<Self> {
        let dim = coords.len();
        for f in &frames {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: f.dim() });
            }
        }
        let mut cometric = vec![vec![Expr::zero(); dim]; dim];
        for l in 0..dim {
            for k in l..dim {
                let entry = Expr::sum(frames.iter().map(|f| &f.components[l] * &f.components[k]));
                cometric[l][k] = entry.clone();
                cometric[k][l] = entry;
            }
        }
        let degeneracy = dim.saturating_sub(frames.len());
        let mut s = Self::new(name, coords, cometric, density, degeneracy)?;
        s.frames = Some(frames);
        Ok(s)
    }

    pub fn with_frames(mut self, frames: Vec<VectorFieldExpr>) -> Result<Self> {
        if let Some(bad) = frames.iter().find(|f| f.dim() != self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: bad.dim() });
        }
        self.frames = Some(frames);
        Ok(self)
    }

    pub fn with_null_coforms(mut self, coforms: Vec<Vec<Expr>>) -> Result<Self> {
        if let Some(bad) = coforms.iter().find(|c| c.len() != self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: bad.len() });
        }
        self.null_coforms = coforms;
        Ok(self)
    }

    pub fn with_macros(mut self, macros: Macros) -> Self {
        self.macros = macros;
        self
    }

    pub fn with_domain(mut self, domain: DomainBox) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: domain.dim() });
        }
        self.domain = Some(domain);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn cometric(&self) -> &[Vec<Expr>] {
        &self.cometric
    }

    pub fn cometric_at(&self, point: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.cometric
            .iter()
            .map(|row| row.iter().map(|e| Ok(Compiled::new(e).eval(point)?)).collect())
            .collect()
    }

    pub fn frames(&self) -> Result<&[VectorFieldExpr]> {
        self.frames.as_deref().ok_or(Error::MissingFrames)
    }

    /// Sampled sanity checks: leading principal minors of the cometric are
    /// `>= -1e-10`, the density is positive, and frames (if any) have rank
    /// `dim - degeneracy`.
    pub fn validate(&self, probes: &[Vec<f64>]) -> Result<()> {
        let density = Compiled::new(&self.density);
        for p in probes {
            let g = self.cometric_at(p)?;
            for k in 1..=self.dim() {
                let minor: Vec<Vec<f64>> = g[..k].iter().map(|r| r[..k].to_vec()).collect();
                let det = determinant(minor);
                if det < -PSD_TOLERANCE {
                    return Err(Error::InvalidStructure(format!(
                        "cometric not PSD at {p:?}: leading minor {k} = {det:e}"
                    )));
                }
            }
            let a = density.eval(p)?;
            if a <= 0.0 {
                return Err(Error::InvalidStructure(format!("volume density {a} <= 0 at {p:?}")));
            }
            if let Some(frames) = &self.frames {
                let rows = frames.iter().map(|f| f.eval(p)).collect::<Result<Vec<_>>>()?;
                let rank = crate::brackets::numeric_rank(&rows, crate::brackets::RANK_TOLERANCE).0;
                let expected = self.dim() - self.degeneracy;
                if rank != expected {
                    return Err(Error::InvalidStructure(format!(
                        "frames have rank {rank} at {p:?}, expected {expected}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Defining function together with the chart it lives on.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub expr: Expr,
    pub coords: CoordSystem,
    pub domain: Option<DomainBox>,
}

impl ScalarField {
    pub fn new(expr: Expr, coords: CoordSystem) -> Self {
        Self { expr, coords, domain: None }
    }

    pub fn check_compatible(&self, s: &SubriemannianStructure) -> Result<()> {
        if self.coords != s.coords {
            return Err(Error::InvalidArgument(format!(
                "field coordinates {:?} do not match structure coordinates {:?}",
                self.coords.names(),
                s.coords.names()
            )));
        }
        Ok(())
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `G(ω)^l = Σ_k g^{lk} ω_k`.
pub fn raise_covector(s: &SubriemannianStructure, omega: &[Expr]) -> Result<Vec<Expr>> {
    check_dim(s.dim(), omega.len())?;
    Ok(s.cometric
        .iter()
        .map(|row| Expr::sum(row.iter().zip(omega).map(|(g, w)| g * w)))
        .collect())
}

/// `<ω, η>*` as an expression.
pub fn pairing(s: &SubriemannianStructure, omega: &[Expr], eta: &[Expr]) -> Result<Expr> {
    let raised = raise_covector(s, eta)?;
    Ok(Expr::sum(omega.iter().zip(&raised).map(|(w, v)| w * v)))
}

/// `|dφ|*²` as an expression.
pub fn conorm_squared(s: &SubriemannianStructure, phi: &Expr) -> Expr {
    let d = gradient(phi, s.dim());
    let raised = raise_covector(s, &d).unwrap_or_default();
    Expr::sum(d.iter().zip(&raised).map(|(a, b)| a * b))
}

/// `|dφ|*` at a point.
pub fn conorm(s: &SubriemannianStructure, phi: &Expr, point: &[f64]) -> Result<f64> {
    check_dim(s.dim(), point.len())?;
    let sq = Compiled::new(&conorm_squared(s, phi)).eval(point)?;
    Ok(sq.max(0.0).sqrt())
}

/// Symbolic horizontal p-mean curvature of the level sets of `φ`, ready for
/// repeated evaluation.
#[derive(Clone, Debug)]
pub struct MeanCurvature {
    pub p: Rational,
    pub conorm_squared: Expr,
    pub value: Expr,
    conorm_tape: Compiled,
    value_tape: Compiled,
}

impl MeanCurvature {
    pub fn new(s: &SubriemannianStructure, phi: &Expr, p: Rational) -> Result<Self> {
        if p.is_negative() {
            return Err(Error::InvalidArgument(format!("p = {p} must be >= 0")));
        }
        let dim = s.dim();
        let d = gradient(phi, dim);
        let raised = raise_covector(s, &d)?;
        let sq = Expr::sum(d.iter().zip(&raised).map(|(a, b)| a * b));
        let weight = Expr::pow(&sq, (p - Rational::one()) / Rational::from_integer(2));
        let a = s.density.clone();
        let divergence = Expr::sum((0..dim).map(|l| {
            let flux = Expr::product([a.clone(), weight.clone(), raised[l].clone()]);
            differentiate(&flux, l)
        }));
        let value = &a.recip() * &divergence;
        Ok(Self::from_parts(p, sq, value))
    }

    pub(crate) fn from_parts(p: Rational, conorm_squared: Expr, value: Expr) -> Self {
        Self {
            p,
            conorm_tape: Compiled::new(&conorm_squared),
            value_tape: Compiled::new(&value),
            conorm_squared,
            value,
        }
    }

    pub fn conorm(&self, point: &[f64]) -> Result<f64> {
        Ok(self.conorm_tape.eval(point)?.max(0.0).sqrt())
    }

    /// Curvature at `point`; `SingularPoint` when `|dφ|* < eps`.
    pub fn eval(&self, point: &[f64], eps: f64) -> Result<f64> {
        let c = self.conorm(point)?;
        if c < eps {
            return Err(Error::SingularPoint { eps, conorm: c });
        }
        Ok(self.value_tape.eval(point)?)
    }
}

/// `H_{φ,p}` at `point`.
pub fn p_mean_curvature(
    s: &SubriemannianStructure,
    phi: &Expr,
    p: Rational,
    point: &[f64],
    eps: f64,
) -> Result<f64> {
    check_dim(s.dim(), point.len())?;
    MeanCurvature::new(s, phi, p)?.eval(point, eps)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularCell {
    /// Flat grid index of the node owning the cell.
    pub index: usize,
    pub grid_point: Vec<f64>,
    /// Refined location (the node itself when unrefined).
    pub point: Vec<f64>,
    /// `|dφ|*` at `point`.
    pub residual: f64,
    pub refined: bool,
}

#[derive(Clone, Debug)]
pub struct SingularScanResult {
    pub grid: GridSpec,
    pub eps: f64,
    pub cells: Vec<SingularCell>,
}

impl SingularScanResult {
    pub fn fraction(&self) -> f64 {
        self.cells.len() as f64 / self.grid.len() as f64
    }

    pub fn is_singular(&self, index: usize) -> bool {
        self.cells.binary_search_by_key(&index, |c| c.index).is_ok()
    }

    /// Groups cells into clusters of grid-adjacent nodes.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut assigned = vec![false; self.cells.len()];
        for start in 0..self.cells.len() {
            if assigned[start] {
                continue;
            }
            assigned[start] = true;
            let mut cluster = vec![self.cells[start].index];
            let mut frontier = vec![start];
            while let Some(c) = frontier.pop() {
                let a = self.grid.multi_index(self.cells[c].index);
                for (k, done) in assigned.iter_mut().enumerate() {
                    if *done {
                        continue;
                    }
                    let b = self.grid.multi_index(self.cells[k].index);
                    if a.iter().zip(&b).all(|(x, y)| x.abs_diff(*y) <= 1) {
                        *done = true;
                        cluster.push(self.cells[k].index);
                        frontier.push(k);
                    }
                }
            }
            cluster.sort_unstable();
            clusters.push(cluster);
        }
        clusters
    }
}

/// Grid cells where `|dφ|* < eps`, with Newton refinement of `|dφ|*²`.
pub fn singular_scan(s: &SubriemannianStructure, phi: &Expr, grid: &GridSpec, eps: f64) -> Result<SingularScanResult> {
    check_dim(s.dim(), grid.dim())?;
    Ok(scan_conorm_squared(&conorm_squared(s, phi), grid, eps))
}

/// Maximum Newton iterations in the singular-set refinement.
pub const NEWTON_MAX_ITER: usize = 20;

/// Scan of a precomputed `|dφ|*²` expression over `grid`.
///
/// Nodes are screened by value (`< eps`) or as discrete local minima of
/// `|dφ|*²`; screened nodes are refined by damped Newton. A cell is reported
/// when the refined point stays within it and is singular, or, failing
/// refinement, when the node itself is singular.
pub fn scan_conorm_squared(conorm_sq: &Expr, grid: &GridSpec, eps: f64) -> SingularScanResult {
    let dim = grid.dim();
    let f = Compiled::new(conorm_sq);
    let (grad, hess) = derivative_tapes(conorm_sq, dim);
    let active: Vec<usize> = (0..dim).filter(|&k| grid.counts[k] > 1).collect();
    let spacing = grid.spacing();

    let values: Vec<Option<f64>> = grid.map(|_, p| f.eval(p).ok());
    let cells = grid.map(|i, node| {
        let v = values[i]?;
        let node_singular = v.max(0.0).sqrt() < eps;
        let idx = grid.multi_index(i);
        let local_min = active.iter().all(|&k| {
            let mut neighbors = Vec::new();
            if idx[k] > 0 {
                let mut j = idx.clone();
                j[k] -= 1;
                neighbors.push(grid.flat_index(&j));
            }
            if idx[k] + 1 < grid.counts[k] {
                let mut j = idx.clone();
                j[k] += 1;
                neighbors.push(grid.flat_index(&j));
            }
            neighbors.iter().all(|&n| values[n].is_none_or(|w| v <= w))
        });
        if !node_singular && !local_min {
            return None;
        }
        let refined = damped_newton(&f, &grad, &hess, node, &active, (1e-3 * eps).powi(2)).filter(|x| {
            active.iter().all(|&k| (x[k] - node[k]).abs() <= 0.5 * spacing[k] * (1.0 + 1e-9))
        });
        match refined {
            Some(x) => {
                let r = f.eval(&x).ok()?.max(0.0).sqrt();
                if r < eps {
                    Some(SingularCell { index: i, grid_point: node.to_vec(), point: x, residual: r, refined: true })
                } else if node_singular {
                    Some(SingularCell {
                        index: i,
                        grid_point: node.to_vec(),
                        point: node.to_vec(),
                        residual: v.max(0.0).sqrt(),
                        refined: false,
                    })
                } else {
                    None
                }
            }
            None if node_singular => Some(SingularCell {
                index: i,
                grid_point: node.to_vec(),
                point: node.to_vec(),
                residual: v.max(0.0).sqrt(),
                refined: false,
            }),
            None => None,
        }
    });
    SingularScanResult { grid: grid.clone(), eps, cells: cells.into_iter().flatten().collect() }
}

/// Damped (Levenberg–Marquardt) Newton descent on `f` over the `active`
/// coordinates, at most [`NEWTON_MAX_ITER`] iterations. Stops early once
/// `f <= target` or the step stalls. Returns the last accepted iterate, or
/// `None` when `f` cannot be evaluated at the start.
pub(crate) fn damped_newton(
    f: &Compiled,
    grad: &[Compiled],
    hess: &[Vec<Compiled>],
    start: &[f64],
    active: &[usize],
    target: f64,
) -> Option<Vec<f64>> {
    let mut x = start.to_vec();
    let mut fx = f.eval(&x).ok()?;
    let mut mu = 1e-12;
    for _ in 0..NEWTON_MAX_ITER {
        if fx <= target {
            break;
        }
        let Ok(g) = active.iter().map(|&k| grad[k].eval(&x)).collect::<Result<Vec<_>, _>>() else {
            break;
        };
        let Ok(mut h) = active
            .iter()
            .map(|&a| active.iter().map(|&b| hess[a][b].eval(&x)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()
        else {
            break;
        };
        let scale = h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for (k, row) in h.iter_mut().enumerate() {
            row[k] += mu * scale;
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(step) = solve(h, rhs) else {
            mu = (mu * 100.0).max(1e-8);
            continue;
        };
        let mut trial = x.clone();
        for (k, &a) in active.iter().enumerate() {
            trial[a] += step[k];
        }
        match f.eval(&trial) {
            Ok(ft) if ft <= fx => {
                let step_norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
                x = trial;
                fx = ft;
                mu = (mu * 0.1).max(1e-12);
                if step_norm <= 1e-15 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()) {
                    break;
                }
            }
            _ => mu = (mu * 100.0).max(1e-8),
        }
    }
    Some(x)
}

/// Symbolic gradient and Hessian tapes of `e`.
pub(crate) fn derivative_tapes(e: &Expr, dim: usize) -> (Vec<Compiled>, Vec<Vec<Compiled>>) {
    let grad_exprs = gradient(e, dim);
    let hess = grad_exprs.iter().map(|g| (0..dim).map(|j| Compiled::new(&differentiate(g, j))).collect()).collect();
    (grad_exprs.iter().map(Compiled::new).collect(), hess)
}

/// Gaussian elimination with partial pivoting; `None` for singular systems.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let piv = match (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())) {
            Some(p) => p,
            None => return 0.0,
        };
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(col, piv);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    det
}

/// Both sides of `<ω-η, ω/|ω| - η/|η|>* = ½(|ω|+|η|) |ω/|ω| - η/|η||*²`
/// for a numeric cometric. Requires `|ω|*, |η|* > 0`.
///
/// Evaluated in double-double arithmetic on `D = |η|ω - |ω|η`, so that
/// `lhs = <ω-η, D>/(|ω||η|)` and `rhs = ½(|ω|+|η|)<D, D>/(|ω||η|)²`: both
/// sides are O(|D|²) while rounding of the norms enters at O(ε), so plain
/// doubles lose relative accuracy for nearly parallel covectors. Only the
/// final divisions are done in `f64`.
pub fn normalized_difference_identity(g: &[Vec<f64>], omega: &[f64], eta: &[f64]) -> Result<(f64, f64)> {
    check_dim(g.len(), omega.len())?;
    check_dim(g.len(), eta.len())?;
    let ip = |a: &[TwoFloat], b: &[TwoFloat]| -> TwoFloat {
        let mut acc = TwoFloat::from(0.0);
        for (l, row) in g.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                acc += a[l] * *v * b[k];
            }
        }
        acc
    };
    let w: Vec<TwoFloat> = omega.iter().map(|&x| TwoFloat::from(x)).collect();
    let e: Vec<TwoFloat> = eta.iter().map(|&x| TwoFloat::from(x)).collect();
    let (ww, ee) = (ip(&w, &w), ip(&e, &e));
    if !(ww.hi() > 0.0 && ee.hi() > 0.0) {
        return Err(Error::InvalidArgument("covectors must have positive norm".into()));
    }
    let (nw, ne) = (ww.sqrt(), ee.sqrt());
    let diff: Vec<TwoFloat> = w.iter().zip(&e).map(|(a, b)| *a - *b).collect();
    let scaled: Vec<TwoFloat> = w.iter().zip(&e).map(|(a, b)| ne * *a - nw * *b).collect();
    let lhs = ip(&diff, &scaled);
    let rhs = (nw + ne) * ip(&scaled, &scaled) * 0.5;
    let f = |x: TwoFloat| x.hi() + x.lo();
    let prod = f(nw * ne);
    Ok((f(lhs) / prod, f(rhs) / prod / prod))
}
