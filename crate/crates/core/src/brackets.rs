//! Vector fields, Lie brackets and pointwise rank of bracket closures.

use crate::calculus::{differentiate, Compiled, Expr};
use crate::error::{Error, Result};
use crate::geometry::SubriemannianStructure;

/// Relative pivot threshold for numeric ranks.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Default nesting depth of bracket words.
pub const DEFAULT_MAX_DEPTH: usize = 4;

/// Vector field `Σ X^k ∂_k` with expression coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VectorFieldExpr {
    pub components: Vec<Expr>,
}

impl VectorFieldExpr {
    pub fn new(components: Vec<Expr>) -> Self {
        Self { components }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![Expr::zero(); dim])
    }

    /// Coordinate field `∂_k`.
    pub fn coordinate(dim: usize, k: usize) -> Self {
        let mut c = vec![Expr::zero(); dim];
        c[k] = Expr::one();
        Self::new(c)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    /// Directional derivative `X f`.
    pub fn apply(&self, f: &Expr) -> Expr {
        Expr::sum(
            self.components
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(k, c)| c * &differentiate(f, k)),
        )
    }

    pub fn scale(&self, f: &Expr) -> Self {
        Self::new(self.components.iter().map(|c| f * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self::new(self.components.iter().zip(&other.components).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self::new(self.components.iter().zip(&other.components).map(|(a, b)| a - b).collect()))
    }

    /// Substitutes expressions for the coordinates in every component.
    pub fn compose(&self, values: &[Expr]) -> Self {
        Self::new(self.components.iter().map(|c| c.compose(values)).collect())
    }

    pub fn compile(&self) -> CompiledField {
        CompiledField { tapes: self.components.iter().map(Compiled::new).collect() }
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.compile().eval(point)
    }
}

/// Evaluation tapes for all components of a field.
#[derive(Clone, Debug)]
pub struct CompiledField {
    tapes: Vec<Compiled>,
}

impl CompiledField {
    pub fn dim(&self) -> usize {
        self.tapes.len()
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.tapes.len() {
            return Err(Error::DimensionMismatch { expected: self.tapes.len(), got: point.len() });
        }
        self.tapes.iter().map(|t| Ok(t.eval(point)?)).collect()
    }
}

fn same_dim(a: &VectorFieldExpr, b: &VectorFieldExpr) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

/// `[X,Y]^l = Σ_k (X^k ∂_k Y^l − Y^k ∂_k X^l)`.
pub fn lie_bracket(x: &VectorFieldExpr, y: &VectorFieldExpr) -> Result<VectorFieldExpr> {
    same_dim(x, y)?;
    if x == y {
        return Ok(VectorFieldExpr::zero(x.dim()));
    }
    Ok(VectorFieldExpr::new(
        x.components
            .iter()
            .zip(&y.components)
            .map(|(xl, yl)| &x.apply(yl) - &y.apply(xl))
            .collect(),
    ))
}

/// Rank of a set of row vectors by Gaussian elimination with full pivoting.
/// Pivots below `rel_tol × (largest row norm)` count as zero. Returns the
/// rank and the absolute threshold used.
pub fn numeric_rank(rows: &[Vec<f64>], rel_tol: f64) -> (usize, f64) {
    let scale = rows.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let threshold = rel_tol * scale;
    if scale == 0.0 || !scale.is_finite() {
        return (0, threshold);
    }
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let ncols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut used_cols = vec![false; ncols];
    for _ in 0..ncols.min(a.len()) {
        let mut best = (0.0, 0, 0);
        for (i, row) in a.iter().enumerate().skip(rank) {
            for (j, v) in row.iter().enumerate() {
                if !used_cols[j] && v.abs() > best.0 {
                    best = (v.abs(), i, j);
                }
            }
        }
        if best.0 <= threshold {
            break;
        }
        let (_, pi, pj) = best;
        a.swap(rank, pi);
        used_cols[pj] = true;
        let pivot = a[rank].clone();
        for row in a.iter_mut().skip(rank + 1) {
            let factor = row[pj] / pivot[pj];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot) {
                    *v -= factor * p;
                }
            }
        }
        rank += 1;
    }
    (rank, threshold)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankReport {
    pub point: Vec<f64>,
    pub rank: usize,
    /// Smallest nesting depth at which `rank` was reached.
    pub depth: usize,
    pub words: usize,
    pub tolerance: f64,
    pub dim: usize,
}

impl RankReport {
    pub fn is_full(&self) -> bool {
        self.rank == self.dim
    }
}

/// Right-nested bracket words `[X_{i1},[X_{i2},…,X_{ik}]]` grouped by depth.
/// Words that vanish identically are dropped, since every bracket with them
/// vanishes too.
#[derive(Clone, Debug)]
pub struct BracketWords {
    pub levels: Vec<Vec<VectorFieldExpr>>,
}

impl BracketWords {
    pub fn generate(fields: &[VectorFieldExpr], max_depth: usize) -> Result<Self> {
        let mut levels: Vec<Vec<VectorFieldExpr>> = Vec::new();
        if max_depth == 0 || fields.is_empty() {
            return Ok(Self { levels });
        }
        levels.push(fields.iter().filter(|f| !f.is_zero()).cloned().collect());
        for _ in 1..max_depth {
            let next = Self::next_level(fields, levels.last().map_or(&[][..], Vec::as_slice))?;
            levels.push(next);
        }
        Ok(Self { levels })
    }

    fn next_level(fields: &[VectorFieldExpr], prev: &[VectorFieldExpr]) -> Result<Vec<VectorFieldExpr>> {
        let mut next = Vec::new();
        for x in fields {
            for w in prev {
                let b = lie_bracket(x, w)?;
                if !b.is_zero() {
                    next.push(b);
                }
            }
        }
        Ok(next)
    }
}

/// Pointwise rank of the span of all right-nested bracket words of depth
/// `<= max_depth`, stopping early at full rank.
pub fn bracket_generate_rank(fields: &[VectorFieldExpr], point: &[f64], max_depth: usize) -> Result<RankReport> {
    let dim = point.len();
    if let Some(bad) = fields.iter().find(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
    }
    let max_depth = max_depth.max(1);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut words = 0;
    let mut best = RankReport { point: point.to_vec(), rank: 0, depth: 1, words: 0, tolerance: 0.0, dim };
    let mut level: Vec<VectorFieldExpr> = fields.iter().filter(|f| !f.is_zero()).cloned().collect();
    for depth in 1..=max_depth {
        if depth > 1 {
            level = BracketWords::next_level(fields, &level)?;
        }
        for w in &level {
            rows.push(w.eval(point)?);
        }
        words += level.len();
        let (rank, tol) = numeric_rank(&rows, RANK_TOLERANCE);
        best.words = words;
        best.tolerance = tol;
        if rank > best.rank {
            best.rank = rank;
            best.depth = depth;
        }
        if rank == dim || level.is_empty() {
            break;
        }
    }
    Ok(best)
}

/// [`bracket_generate_rank`] at several points sharing one lazily grown set
/// of bracket words; each point stops once its rank reaches `target`.
pub fn rank_at_points(
    fields: &[VectorFieldExpr],
    points: &[Vec<f64>],
    max_depth: usize,
    target: usize,
) -> Result<Vec<RankReport>> {
    let max_depth = max_depth.max(1);
    let mut reports: Vec<RankReport> = points
        .iter()
        .map(|p| RankReport { point: p.clone(), rank: 0, depth: 1, words: 0, tolerance: 0.0, dim: p.len() })
        .collect();
    let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); points.len()];
    let mut done = vec![false; points.len()];
    let mut level: Vec<VectorFieldExpr> = fields.iter().filter(|f| !f.is_zero()).cloned().collect();
    for depth in 1..=max_depth {
        if depth > 1 {
            if level.is_empty() || done.iter().all(|d| *d) {
                break;
            }
            level = BracketWords::next_level(fields, &level)?;
        }
        let tapes: Vec<CompiledField> = level.iter().map(VectorFieldExpr::compile).collect();
        for (i, p) in points.iter().enumerate() {
            if done[i] {
                continue;
            }
            for t in &tapes {
                rows[i].push(t.eval(p)?);
            }
            let (rank, tol) = numeric_rank(&rows[i], RANK_TOLERANCE);
            let r = &mut reports[i];
            r.words += level.len();
            r.tolerance = tol;
            if rank > r.rank {
                r.rank = rank;
                r.depth = depth;
            }
            if rank >= target.min(p.len()) {
                done[i] = true;
            }
        }
    }
    Ok(reports)
}

/// Rank reports over probe points plus the indices where the rank differs
/// from the first probe (a diagnostic for non-constant rank).
pub fn rank_profile(
    fields: &[VectorFieldExpr],
    probes: &[Vec<f64>],
    max_depth: usize,
) -> Result<(Vec<RankReport>, Vec<usize>)> {
    let reports = probes.iter().map(|p| bracket_generate_rank(fields, p, max_depth)).collect::<Result<Vec<_>>>()?;
    let jumps = match reports.first() {
        Some(first) => reports.iter().enumerate().filter(|(_, r)| r.rank != first.rank).map(|(i, _)| i).collect(),
        None => Vec::new(),
    };
    Ok((reports, jumps))
}

/// Fields `X_ij = (E_jφ) E_i − (E_iφ) E_j`, `i < j`, tangent to the level
/// sets of `φ` and horizontal.
pub fn tangent_distribution_fields(s: &SubriemannianStructure, phi: &Expr) -> Result<Vec<VectorFieldExpr>> {
    let frames = s.frames()?;
    let derivs: Vec<Expr> = frames.iter().map(|e| e.apply(phi)).collect();
    let mut out = Vec::new();
    for i in 0..frames.len() {
        for j in i + 1..frames.len() {
            let x = frames[i].scale(&derivs[j]).sub(&frames[j].scale(&derivs[i]))?;
            out.push(x);
        }
    }
    Ok(out)
}

/// `M_kj = ∂_k F_j − ∂_j F_k` for a one-form `Σ F_j dx^j` (F padded with
/// zeros up to `dim`).
pub fn curl_matrix(f: &[Expr], dim: usize) -> Vec<Vec<Expr>> {
    let comp = |j: usize| f.get(j).cloned().unwrap_or_else(Expr::zero);
    (0..dim)
        .map(|k| (0..dim).map(|j| &differentiate(&comp(j), k) - &differentiate(&comp(k), j)).collect())
        .collect()
}

/// Rank of the skew matrix `M` at `point`, or of `BᵀMB` when a restriction
/// basis (list of vectors) is given.
pub fn two_form_rank(m: &[Vec<Expr>], point: &[f64], restriction: Option<&[Vec<f64>]>) -> Result<usize> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(Error::NotSkew);
    }
    let mut vals = vec![vec![0.0; n]; n];
    for k in 0..n {
        for j in 0..n {
            vals[k][j] = Compiled::new(&m[k][j]).eval(point)?;
        }
    }
    for k in 0..n {
        for j in k..n {
            let symbolic = (&m[k][j] + &m[j][k]).is_zero();
            let scale = vals[k][j].abs().max(vals[j][k].abs()).max(1.0);
            if !symbolic && (vals[k][j] + vals[j][k]).abs() > 1e-12 * scale {
                return Err(Error::NotSkew);
            }
        }
    }
    let rows = match restriction {
        None => vals,
        Some(basis) => {
            if let Some(b) = basis.iter().find(|b| b.len() != n) {
                return Err(Error::DimensionMismatch { expected: n, got: b.len() });
            }
            basis
                .iter()
                .map(|a| {
                    basis
                        .iter()
                        .map(|b| (0..n).map(|k| (0..n).map(|j| a[k] * vals[k][j] * b[j]).sum::<f64>()).sum())
                        .collect()
                })
                .collect()
        }
    };
    Ok(numeric_rank(&rows, RANK_TOLERANCE).0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WTensorReport {
    /// `W[α][pair]` for pairs `(i, j)`, `i < j`, in lexicographic order.
    pub w: Vec<Vec<f64>>,
    pub rank: usize,
    pub independent: bool,
    /// `k(k−1)/2 >= l`.
    pub dimension_count_ok: bool,
}

/// `W_ij^α = θ^α([X_i, X_j])` at `point` and whether the `l` matrices
/// `W^α` are linearly independent.
pub fn w_tensor_independence(
    fields: &[VectorFieldExpr],
    null_coforms: &[Vec<Expr>],
    complement: &[VectorFieldExpr],
    point: &[f64],
) -> Result<WTensorReport> {
    let dim = point.len();
    let l = null_coforms.len();
    let k = fields.len();
    if complement.len() != l {
        return Err(Error::FrameInconsistency(format!(
            "{} complement fields for {l} null coforms",
            complement.len()
        )));
    }
    if fields.iter().chain(complement).any(|f| f.dim() != dim) || null_coforms.iter().any(|t| t.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: 0 });
    }
    let theta: Vec<Vec<f64>> = null_coforms
        .iter()
        .map(|t| t.iter().map(|c| Ok(Compiled::new(c).eval(point)?)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let pair = |t: &[f64], v: &[f64]| t.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let xs: Vec<Vec<f64>> = fields.iter().map(|f| f.eval(point)).collect::<Result<_>>()?;
    for (a, t) in theta.iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            let scale = t.iter().map(|v| v.abs()).sum::<f64>() * x.iter().map(|v| v.abs()).sum::<f64>();
            if pair(t, x).abs() > 1e-10 * scale.max(1.0) {
                return Err(Error::FrameInconsistency(format!(
                    "null coform {} does not annihilate field {}",
                    a + 1,
                    i + 1
                )));
            }
        }
    }
    let mut w = vec![Vec::new(); l];
    for i in 0..k {
        for j in i + 1..k {
            let b = lie_bracket(&fields[i], &fields[j])?.eval(point)?;
            for (a, t) in theta.iter().enumerate() {
                w[a].push(pair(t, &b));
            }
        }
    }
    let rank = if l == 0 || k < 2 { 0 } else { numeric_rank(&w, RANK_TOLERANCE).0 };
    Ok(WTensorReport { rank, independent: rank == l, dimension_count_ok: k * k.saturating_sub(1) / 2 >= l, w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{parse_expr, CoordSystem};

    fn field(src: &[&str], coords: &CoordSystem) -> VectorFieldExpr {
        VectorFieldExpr::new(src.iter().map(|s| parse_expr(s, coords).unwrap()).collect())
    }

    fn h1() -> (CoordSystem, VectorFieldExpr, VectorFieldExpr) {
        let c = CoordSystem::new(["x", "y", "z"]).unwrap();
        let e1 = field(&["1", "0", "y"], &c);
        let e2 = field(&["0", "1", "-x"], &c);
        (c, e1, e2)
    }

    #[test]
    fn heisenberg_bracket() {
        let (_, e1, e2) = h1();
        let b = lie_bracket(&e1, &e2).unwrap();
        assert_eq!(b.components, vec![Expr::zero(), Expr::zero(), Expr::int(-2)]);
        assert!(lie_bracket(&e1, &e1).unwrap().is_zero());
    }

    #[test]
    fn coordinate_field_bracket_vanishes() {
        let c = CoordSystem::new(["x", "y"]).unwrap();
        let dx = VectorFieldExpr::coordinate(2, 0);
        let ydx = field(&["y", "0"], &c);
        assert!(lie_bracket(&dx, &ydx).unwrap().is_zero());
    }

    #[test]
    fn heisenberg_rank() {
        let (_, e1, e2) = h1();
        let r = bracket_generate_rank(&[e1.clone(), e2], &[0.3, -1.0, 2.0], 4).unwrap();
        assert_eq!((r.rank, r.depth), (3, 2));
        let single = bracket_generate_rank(&[e1], &[0.0, 0.0, 0.0], 4).unwrap();
        assert_eq!((single.rank, single.depth), (1, 1));
    }

    #[test]
    fn rank_ignores_tiny_noise() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1e-12]];
        assert_eq!(numeric_rank(&rows, RANK_TOLERANCE).0, 1);
        assert_eq!(numeric_rank(&[vec![0.0, 0.0]], RANK_TOLERANCE).0, 0);
        assert_eq!(numeric_rank(&[vec![1.0, 2.0], vec![2.0, 1.0]], RANK_TOLERANCE).0, 2);
    }

    #[test]
    fn curl_rank_of_standard_f() {
        let c = CoordSystem::new(["x1", "x2"]).unwrap();
        let f = vec![parse_expr("-x2", &c).unwrap(), parse_expr("x1", &c).unwrap()];
        let m = curl_matrix(&f, 2);
        assert_eq!(m[0][1], Expr::int(2));
        assert_eq!(two_form_rank(&m, &[0.1, 0.2], None).unwrap(), 2);
        let zero = curl_matrix(&[Expr::zero(), Expr::zero()], 2);
        assert_eq!(two_form_rank(&zero, &[0.1, 0.2], None).unwrap(), 0);
        let restricted = two_form_rank(&m, &[0.1, 0.2], Some(&[vec![1.0, 0.0]])).unwrap();
        assert_eq!(restricted, 0);
    }

    #[test]
    fn non_skew_rejected() {
        let m = vec![vec![Expr::zero(), Expr::one()], vec![Expr::one(), Expr::zero()]];
        assert_eq!(two_form_rank(&m, &[0.0, 0.0], None), Err(Error::NotSkew));
    }

    #[test]
    fn w_tensor_cases() {
        let (c, e1, e2) = h1();
        let theta = vec![
            parse_expr("-y", &c).unwrap(),
            parse_expr("x", &c).unwrap(),
            Expr::one(),
        ];
        let dz = VectorFieldExpr::coordinate(3, 2);
        let fields = [e1, e2];
        let r = w_tensor_independence(&fields, std::slice::from_ref(&theta), std::slice::from_ref(&dz), &[0.4, 0.7, 0.1]).unwrap();
        assert_eq!(r.w, vec![vec![-2.0]]);
        assert!(r.independent && r.dimension_count_ok);
        let vacuous = w_tensor_independence(&fields, &[], &[], &[0.4, 0.7, 0.1]).unwrap();
        assert!(vacuous.independent);
        let dup = w_tensor_independence(&fields, &[theta.clone(), theta], &[dz.clone(), dz], &[0.4, 0.7, 0.1]).unwrap();
        assert!(!dup.independent);
        let bad = vec![Expr::one(), Expr::zero(), Expr::zero()];
        assert!(matches!(
            w_tensor_independence(&fields, &[bad], &[VectorFieldExpr::coordinate(3, 2)], &[0.4, 0.7, 0.1]),
            Err(Error::FrameInconsistency(_))
        ));
    }
}
