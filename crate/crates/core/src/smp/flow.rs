use crate::brackets::{lie_bracket, CompiledField, VectorFieldExpr};
use crate::error::{Error, Result};

/// Polyline of an integral curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Vec<f64>>,
    /// Evaluation failed; `points` holds the partial curve.
    pub aborted: bool,
    /// Stopped early by the caller's predicate (e.g. left the box).
    pub stopped: bool,
}

impl Trajectory {
    pub fn end(&self) -> &[f64] {
        self.points.last().map_or(&[], Vec::as_slice)
    }
}

/// Classical RK4 for `dx/dt = X(x)` on `[0, T]` with `⌈|T|/step⌉` equal
/// steps (negative `T` integrates backwards).
pub fn integrate_field(x: &VectorFieldExpr, x0: &[f64], t: f64, step: f64) -> Result<Trajectory> {
    integrate_until(&x.compile(), x0, t, step, |_| false)
}

/// As [`integrate_field`], stopping after the first point for which `stop`
/// returns true (that point is kept).
pub fn integrate_until(
    field: &CompiledField,
    x0: &[f64],
    t: f64,
    step: f64,
    mut stop: impl FnMut(&[f64]) -> bool,
) -> Result<Trajectory> {
    if !(step > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("bad integration parameters T = {t}, step = {step}")));
    }
    if field.dim() != x0.len() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: x0.len() });
    }
    let steps = (t.abs() / step).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let mut points = Vec::with_capacity(steps + 1);
    points.push(x0.to_vec());
    let mut x = x0.to_vec();
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + s * k).collect() };
    for _ in 0..steps {
        let k = (|| -> Result<_> {
            let k1 = field.eval(&x)?;
            let k2 = field.eval(&axpy(&x, &k1, 0.5 * h))?;
            let k3 = field.eval(&axpy(&x, &k2, 0.5 * h))?;
            let k4 = field.eval(&axpy(&x, &k3, h))?;
            Ok((k1, k2, k3, k4))
        })();
        let Ok((k1, k2, k3, k4)) = k else {
            return Ok(Trajectory { points, aborted: true, stopped: false });
        };
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        points.push(x.clone());
        if stop(&x) {
            return Ok(Trajectory { points, aborted: false, stopped: true });
        }
    }
    Ok(Trajectory { points, aborted: false, stopped: false })
}

/// One integration of one field from one start in one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationRun {
    pub start: Vec<f64>,
    /// Index into the field list (brackets follow the base fields).
    pub field: usize,
    pub direction: i8,
    pub steps: usize,
    pub max_gap: f64,
    /// First step with `|v − u| > eps_touch`.
    pub first_violation: Option<usize>,
    pub exited_box: bool,
    pub aborted: bool,
}

impl PropagationRun {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    pub runs: Vec<PropagationRun>,
}

impl PropagationResult {
    pub fn holds(&self) -> bool {
        self.runs.iter().all(PropagationRun::holds)
    }

    pub fn max_gap(&self) -> f64 {
        self.runs.iter().map(|r| r.max_gap).fold(0.0, f64::max)
    }
}

/// Integrates every field (and, if asked, every bracket of two fields) from
/// `start` in both directions and tracks `gap(x) = |v − u|` along the way.
/// `gap` returns `None` outside the domain; trajectories are clipped there.
pub fn propagate_max(
    gap: &(dyn Fn(&[f64]) -> Option<f64> + Sync),
    fields: &[VectorFieldExpr],
    start: &[f64],
    t: f64,
    step: f64,
    eps_touch: f64,
    with_brackets: bool,
) -> Result<PropagationResult> {
    let mut all: Vec<VectorFieldExpr> = fields.to_vec();
    if with_brackets {
        for i in 0..fields.len() {
            for j in i + 1..fields.len() {
                all.push(lie_bracket(&fields[i], &fields[j])?);
            }
        }
    }
    let mut runs = Vec::new();
    for (k, f) in all.iter().enumerate() {
        let compiled = f.compile();
        for direction in [1i8, -1] {
            let mut max_gap = gap(start).unwrap_or(0.0);
            let mut first_violation = (max_gap > eps_touch).then_some(0);
            let mut exited = false;
            let mut count = 0usize;
            let traj = integrate_until(&compiled, start, direction as f64 * t.abs(), step, |x| {
                count += 1;
                match gap(x) {
                    Some(g) => {
                        if g > max_gap {
                            max_gap = g;
                        }
                        if g > eps_touch && first_violation.is_none() {
                            first_violation = Some(count);
                        }
                        false
                    }
                    None => {
                        exited = true;
                        true
                    }
                }
            })?;
            runs.push(PropagationRun {
                start: start.to_vec(),
                field: k,
                direction,
                steps: traj.points.len() - 1,
                max_gap,
                first_violation,
                exited_box: exited,
                aborted: traj.aborted,
            });
        }
    }
    Ok(PropagationResult { runs })
}
