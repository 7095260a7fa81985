//! Strong-maximum-principle comparison harness.
//!
//! A scenario compares two graphs `u`, `v` over a chart under one curvature
//! operator. The harness relabels the pair so that `v ≥ u`, locates the
//! touching set, measures the curvature gap `max(H(v) − H(u))`, scans both
//! graphs for singular points, evaluates the bracket rank of the tangent
//! horizontal distribution at touching points, follows integral curves of
//! that distribution, and classifies the outcome.

mod flow;
mod operator;
mod variation;

use rayon::prelude::*;

pub use flow::{integrate_field, integrate_until, propagate_max, PropagationResult, PropagationRun, Trajectory};
pub use operator::{CompiledCurvature, GraphOperator};
pub use variation::{variation_check, BOUNDARY_TOLERANCE};

use crate::brackets::{rank_at_points, RankReport, DEFAULT_MAX_DEPTH};
use crate::calculus::{Compiled, CoordSystem, Expr};
use crate::error::{Error, Result};
use crate::geometry::{damped_newton, derivative_tapes, scan_conorm_squared, SingularScanResult, DEFAULT_EPS_SING};
use crate::grid::GridSpec;

pub const DEFAULT_GRID: usize = 65;
pub const DEFAULT_HORIZON: f64 = 0.5;
pub const DEFAULT_STEP: f64 = 1e-3;
/// Radius (in grid cells) of the ball checked around each touching point.
pub const NEIGHBORHOOD_RADIUS: usize = 5;
/// Upper bound on touching points used as rank probes and propagation starts.
pub const MAX_PROBE_STARTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub eps_touch: f64,
    pub eps_order: f64,
    pub eps_h: f64,
    pub eps_sing: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eps_touch: 1e-6, eps_order: 1e-9, eps_h: 1e-7, eps_sing: DEFAULT_EPS_SING }
    }
}

#[derive(Clone, Debug)]
pub struct ComparisonScenario {
    pub name: String,
    pub description: String,
    pub operator: GraphOperator,
    pub chart: CoordSystem,
    pub u: Expr,
    pub v: Expr,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub horizon: f64,
    pub step: f64,
    pub max_depth: usize,
    /// Also integrate brackets of pairs of tangent fields.
    pub propagate_brackets: bool,
}

impl ComparisonScenario {
    pub fn new(name: impl Into<String>, operator: GraphOperator, chart: CoordSystem, u: Expr, v: Expr, grid: GridSpec) -> Self {
        Self {
            name: name.into(),
            description: String::new(),
            operator,
            chart,
            u,
            v,
            grid,
            tolerances: Tolerances::default(),
            horizon: DEFAULT_HORIZON,
            step: DEFAULT_STEP,
            max_depth: DEFAULT_MAX_DEPTH,
            propagate_brackets: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.operator.chart_dim();
        if self.chart.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.chart.len() });
        }
        if self.grid.dim() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.grid.dim() });
        }
        for (name, f) in [("u", &self.u), ("v", &self.v)] {
            if f.max_var().is_some_and(|k| k >= m) {
                return Err(Error::InvalidArgument(format!("{name} depends on a coordinate outside the chart")));
            }
        }
        if self.operator.p() < crate::calculus::Rational::from_integer(0) {
            return Err(Error::InvalidArgument("p must be >= 0".into()));
        }
        let t = &self.tolerances;
        if [t.eps_touch, t.eps_order, t.eps_h, t.eps_sing].iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.step > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument("integration step must be positive".into()));
        }
        Ok(())
    }

    /// The pair relabeled so that `v ≥ u` (when ordering holds either way).
    pub fn normalized(&self) -> (Ordering, Expr, Expr) {
        let ord = ordering(&self.u, &self.v, &self.grid, self.tolerances.eps_order);
        if ord.swapped {
            (ord, self.v.clone(), self.u.clone())
        } else {
            (ord, self.u.clone(), self.v.clone())
        }
    }
}

/// Ordering verdict after orientation normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Ordering {
    pub swapped: bool,
    pub holds: bool,
    /// `min(v − u)` over evaluable grid points (after the swap).
    pub min_gap: f64,
    pub argmin: Vec<f64>,
    pub max_gap: f64,
    pub evaluated: usize,
}

fn differences(u: &Expr, v: &Expr, grid: &GridSpec) -> Vec<Option<f64>> {
    let (ut, vt) = (Compiled::new(u), Compiled::new(v));
    grid.map(|_, x| Some(vt.eval(x).ok()? - ut.eval(x).ok()?))
}

/// Ordering of `v` over `u`: unchanged when `v − u ≥ −eps` everywhere,
/// swapped when `v − u ≤ eps` everywhere, violated otherwise.
pub fn ordering(u: &Expr, v: &Expr, grid: &GridSpec, eps_order: f64) -> Ordering {
    let d = differences(u, v, grid);
    let mut min = (f64::INFINITY, 0usize);
    let mut max = (f64::NEG_INFINITY, 0usize);
    let mut evaluated = 0;
    for (i, g) in d.iter().enumerate() {
        if let Some(g) = *g {
            evaluated += 1;
            if g < min.0 {
                min = (g, i);
            }
            if g > max.0 {
                max = (g, i);
            }
        }
    }
    if evaluated == 0 {
        return Ordering { swapped: false, holds: false, min_gap: f64::NAN, argmin: Vec::new(), max_gap: f64::NAN, evaluated };
    }
    if min.0 >= -eps_order {
        Ordering { swapped: false, holds: true, min_gap: min.0, argmin: grid.point(min.1), max_gap: max.0, evaluated }
    } else if max.0 <= eps_order {
        Ordering { swapped: true, holds: true, min_gap: -max.0, argmin: grid.point(max.1), max_gap: -min.0, evaluated }
    } else {
        Ordering { swapped: false, holds: false, min_gap: min.0, argmin: grid.point(min.1), max_gap: max.0, evaluated }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TouchPoint {
    pub index: usize,
    pub grid_point: Vec<f64>,
    pub point: Vec<f64>,
    /// `v − u` at `point`.
    pub gap: f64,
    pub refined: bool,
}

/// Grid points with `|v − u| ≤ eps_touch`, each refined by damped Newton
/// descent on `v − u` within its cell. Assumes `v ≥ u`.
pub fn touching_points(u: &Expr, v: &Expr, grid: &GridSpec, eps_touch: f64) -> Vec<TouchPoint> {
    let diff = v - u;
    let d = Compiled::new(&diff);
    let (grad, hess) = derivative_tapes(&diff, grid.dim());
    let active: Vec<usize> = (0..grid.dim()).filter(|&k| grid.counts[k] > 1).collect();
    let spacing = grid.spacing();
    let found = grid.map(|i, x| {
        let g = d.eval(x).ok()?;
        if g.abs() > eps_touch {
            return None;
        }
        let refined = damped_newton(&d, &grad, &hess, x, &active, 0.0).and_then(|p| {
            let inside = active.iter().all(|&k| (p[k] - x[k]).abs() <= 0.5 * spacing[k] * (1.0 + 1e-9));
            let gp = d.eval(&p).ok()?;
            (inside && gp.abs() <= eps_touch).then_some((p, gp))
        });
        Some(match refined {
            Some((p, gp)) => TouchPoint { index: i, grid_point: x.to_vec(), point: p, gap: gp, refined: true },
            None => TouchPoint { index: i, grid_point: x.to_vec(), point: x.to_vec(), gap: g, refined: false },
        })
    });
    found.into_iter().flatten().collect()
}

/// Touching set of a scenario (after orientation normalization).
pub fn touching_set(s: &ComparisonScenario) -> Vec<TouchPoint> {
    let (_, u, v) = s.normalized();
    touching_points(&u, &v, &s.grid, s.tolerances.eps_touch)
}

/// Per-point curvature values; `None` at singular or non-evaluable points.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureRow {
    pub h_u: Option<f64>,
    pub h_v: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureGap {
    /// `max(H(v) − H(u))` over points where both are defined.
    pub gap: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub skipped: usize,
    pub rows: Vec<CurvatureRow>,
}

/// Curvature gap of an explicit (already oriented) pair.
pub fn curvature_gap_of(op: &GraphOperator, u: &Expr, v: &Expr, grid: &GridSpec, eps_sing: f64) -> Result<CurvatureGap> {
    let hu = op.curvature(u)?;
    let hv = op.curvature(v)?;
    let rows: Vec<CurvatureRow> =
        grid.map(|_, x| CurvatureRow { h_u: hu.eval(x, eps_sing).ok(), h_v: hv.eval(x, eps_sing).ok() });
    let mut gap: Option<(f64, usize)> = None;
    let mut skipped = 0;
    for (i, r) in rows.iter().enumerate() {
        match (r.h_u, r.h_v) {
            (Some(a), Some(b)) => {
                let g = b - a;
                if gap.is_none_or(|(m, _)| g > m) {
                    gap = Some((g, i));
                }
            }
            _ => skipped += 1,
        }
    }
    Ok(CurvatureGap { gap: gap.map(|g| g.0), witness: gap.map(|g| grid.point(g.1)), skipped, rows })
}

/// Curvature gap of a scenario (after orientation normalization).
pub fn curvature_gap(s: &ComparisonScenario) -> Result<CurvatureGap> {
    let (_, u, v) = s.normalized();
    curvature_gap_of(&s.operator, &u, &v, &s.grid, s.tolerances.eps_sing)
}

/// Fields recorded from a run, sufficient to recompute the classification.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurements {
    pub ordering_evaluated: bool,
    pub ordering_holds: bool,
    pub curvature_gap: Option<f64>,
    pub touching: usize,
    pub coincide: bool,
    pub rank: Option<usize>,
    pub rank_target: usize,
    pub singular_touch: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub label: String,
    pub notes: Vec<String>,
}

pub const SINGULAR_TOUCH_NOTE: &str = "singular-touch: curvature comparison verified on annulus";

/// Classification rules, in order:
/// ordering unavailable → inconclusive; ordering fails or gap > ε_H →
/// hypothesis-violated; no gap → inconclusive; no touching → smp-consistent;
/// `v = u` near every touching point → coincide-near-touching; rank
/// unavailable → inconclusive; otherwise counterexample-detected, with
/// `;rank-condition-failed` when the rank stays below `m`.
pub fn classify(m: &Measurements, tol: &Tolerances) -> Classification {
    let mut notes = Vec::new();
    if m.singular_touch {
        notes.push(SINGULAR_TOUCH_NOTE.to_string());
    }
    let label = if !m.ordering_evaluated {
        "inconclusive".to_string()
    } else if !m.ordering_holds {
        "hypothesis-violated".to_string()
    } else {
        match m.curvature_gap {
            None => "inconclusive".to_string(),
            Some(g) if g > tol.eps_h => "hypothesis-violated".to_string(),
            Some(_) if m.touching == 0 => "smp-consistent".to_string(),
            Some(_) if m.coincide => "coincide-near-touching".to_string(),
            Some(_) => match m.rank {
                None => "inconclusive".to_string(),
                Some(r) if r < m.rank_target => "counterexample-detected;rank-condition-failed".to_string(),
                Some(_) => "counterexample-detected".to_string(),
            },
        }
    };
    Classification { label, notes }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularSummary {
    pub fraction: f64,
    pub cells: usize,
    pub clusters: usize,
    /// One representative (refined) point per cluster.
    pub representatives: Vec<Vec<f64>>,
    pub indices: Vec<usize>,
}

impl SingularSummary {
    fn from_scan(scan: &SingularScanResult) -> Self {
        let clusters = scan.clusters();
        let representatives = clusters
            .iter()
            .map(|c| {
                let best = c
                    .iter()
                    .filter_map(|i| scan.cells.iter().find(|cell| cell.index == *i))
                    .min_by(|a, b| a.residual.total_cmp(&b.residual));
                best.map_or_else(Vec::new, |cell| cell.point.clone())
            })
            .collect();
        Self {
            fraction: scan.fraction(),
            cells: scan.cells.len(),
            clusters: clusters.len(),
            representatives,
            indices: scan.cells.iter().map(|c| c.index).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub scenario: String,
    pub description: String,
    pub operator: String,
    pub chart: Vec<String>,
    pub u: String,
    pub v: String,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub horizon: f64,
    pub step: f64,
    pub max_depth: usize,
    pub ordering: Ordering,
    pub touching: Vec<TouchPoint>,
    pub curvature_gap: Option<f64>,
    pub gap_witness: Option<Vec<f64>>,
    pub gap_skipped: usize,
    pub singular_u: SingularSummary,
    pub singular_v: SingularSummary,
    pub rank: Option<RankReport>,
    pub rank_target: usize,
    pub rank_points: usize,
    pub rank_note: Option<String>,
    pub coincide: bool,
    pub propagation: PropagationResult,
    pub classification: Classification,
    /// Per grid point: `v − u` and curvatures (after the swap).
    pub differences: Vec<Option<f64>>,
    pub curvatures: Vec<CurvatureRow>,
}

impl ScenarioReport {
    pub fn measurements(&self) -> Measurements {
        let singular: std::collections::BTreeSet<usize> =
            self.singular_u.indices.iter().chain(&self.singular_v.indices).copied().collect();
        Measurements {
            ordering_evaluated: self.ordering.evaluated > 0,
            ordering_holds: self.ordering.holds,
            curvature_gap: self.curvature_gap,
            touching: self.touching.len(),
            coincide: self.coincide,
            rank: self.rank.as_ref().map(|r| r.rank),
            rank_target: self.rank_target,
            singular_touch: self.touching.iter().any(|t| singular.contains(&t.index)),
        }
    }

    pub fn reclassify(&self) -> Classification {
        classify(&self.measurements(), &self.tolerances)
    }
}

/// Evenly spaced subsample of at most `max` items.
fn subsample<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    (0..max).map(|k| items[k * (items.len() - 1) / (max - 1).max(1)].clone()).collect()
}

/// Runs every measurement of the harness and classifies the scenario.
/// Only an invalid scenario is an error; everything else is report data.
pub fn run_scenario(s: &ComparisonScenario) -> Result<ScenarioReport> {
    s.validate()?;
    let tol = s.tolerances;
    let (ord, u, v) = s.normalized();
    let differences = differences(&u, &v, &s.grid);
    let touching = if ord.holds { touching_points(&u, &v, &s.grid, tol.eps_touch) } else { Vec::new() };

    let gap = curvature_gap_of(&s.operator, &u, &v, &s.grid, tol.eps_sing).ok();
    let scan = |f: &Expr| match s.operator.singular_measure(f) {
        Ok(e) => SingularSummary::from_scan(&scan_conorm_squared(&e, &s.grid, tol.eps_sing)),
        Err(_) => SingularSummary { fraction: f64::NAN, cells: 0, clusters: 0, representatives: Vec::new(), indices: Vec::new() },
    };
    let singular_u = scan(&u);
    let singular_v = scan(&v);

    let coincide = !touching.is_empty()
        && touching.iter().all(|t| {
            s.grid
                .neighborhood(t.index, NEIGHBORHOOD_RADIUS)
                .iter()
                .all(|&j| differences[j].is_some_and(|d| d.abs() <= tol.eps_touch))
        });

    let singular_nodes: std::collections::BTreeSet<usize> =
        singular_u.indices.iter().chain(&singular_v.indices).copied().collect();
    let regular_touch: Vec<&TouchPoint> = touching.iter().filter(|t| !singular_nodes.contains(&t.index)).collect();
    let starts = subsample(&regular_touch, MAX_PROBE_STARTS);
    let u_tape = Compiled::new(&u);
    let lifted: Vec<Vec<f64>> = starts
        .iter()
        .filter_map(|t| Some(s.operator.lift_point(&t.point, u_tape.eval(&t.point).ok()?)))
        .collect();

    let mut rank_note = None;
    let rank_target = s.operator.surface_dim();
    let fields = match s.operator.tangent_fields(&u) {
        Ok(f) => Some(f),
        Err(e) => {
            rank_note = Some(format!("rank not evaluated: {e}"));
            None
        }
    };
    let rank = match (&fields, lifted.is_empty()) {
        (Some(f), false) => match rank_at_points(f, &lifted, s.max_depth, rank_target) {
            Ok(reports) => reports.into_iter().min_by_key(|r| r.rank),
            Err(e) => {
                rank_note = Some(format!("rank not evaluated: {e}"));
                None
            }
        },
        _ => None,
    };

    let mut runs = Vec::new();
    if let Some(f) = &fields {
        let dt = Compiled::new(&(&v - &u));
        let domain = &s.grid.domain;
        let op = &s.operator;
        let gap_fn = move |p: &[f64]| -> Option<f64> {
            let x = op.project(p);
            if !domain.contains_with(&x, 1e-12) {
                return None;
            }
            dt.eval(&x).ok().map(f64::abs)
        };
        let results: Vec<Result<PropagationResult>> = lifted
            .par_iter()
            .map(|p| propagate_max(&gap_fn, f, p, s.horizon, s.step, tol.eps_touch, s.propagate_brackets))
            .collect();
        for r in results.into_iter().flatten() {
            runs.extend(r.runs);
        }
    }

    let (curvature_gap, gap_witness, gap_skipped, curvatures) = match gap {
        Some(g) => (g.gap, g.witness, g.skipped, g.rows),
        None => (None, None, s.grid.len(), vec![CurvatureRow { h_u: None, h_v: None }; s.grid.len()]),
    };

    let mut report = ScenarioReport {
        scenario: s.name.clone(),
        description: s.description.clone(),
        operator: s.operator.to_string(),
        chart: s.chart.names().to_vec(),
        u: u.display(&s.chart).to_string(),
        v: v.display(&s.chart).to_string(),
        grid: s.grid.clone(),
        tolerances: tol,
        horizon: s.horizon,
        step: s.step,
        max_depth: s.max_depth,
        ordering: ord,
        touching,
        curvature_gap,
        gap_witness,
        gap_skipped,
        singular_u,
        singular_v,
        rank,
        rank_target,
        rank_points: lifted.len(),
        rank_note,
        coincide,
        propagation: PropagationResult { runs },
        classification: Classification { label: String::new(), notes: Vec::new() },
        differences,
        curvatures,
    };
    report.classification = report.reclassify();
    Ok(report)
}
