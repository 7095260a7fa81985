//! Deterministic JSON and CSV rendering.
//!
//! Floats are written with 17 significant digits, object keys keep insertion
//! order and arrays follow grid-index order, so identical inputs give
//! byte-identical files.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde_json::{json, Map, Number, Value};
use subcurv::smp::{classify, Classification, Measurements, ScenarioReport, Tolerances};
use subcurv::{GridSpec, RankReport};

pub const SCHEMA_VERSION: &str = "1";

/// 17 significant digits: positional for moderate exponents, `d.ddde±XX`
/// otherwise. Non-finite values render as `nan`, `inf`, `-inf`.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.0000000000000000".into();
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let e: i32 = exp.parse().unwrap_or(0);
    if (-5..17).contains(&e) {
        let decimals = (16 - e).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        let sign = if e < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", e.abs())
    }
}

/// JSON number with 17 significant digits; `null` when not finite.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(fmt17(x).parse::<Number>().expect("formatted float is a JSON number"))
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(num).collect())
}

pub fn grid_json(g: &GridSpec) -> Value {
    json!({
        "box": g.domain.bounds.iter().map(|(a, b)| nums(&[*a, *b])).collect::<Vec<_>>(),
        "counts": g.counts,
    })
}

pub fn tolerances_json(t: &Tolerances) -> Value {
    json!({
        "eps_touch": num(t.eps_touch),
        "eps_order": num(t.eps_order),
        "eps_H": num(t.eps_h),
        "eps_sing": num(t.eps_sing),
    })
}

pub fn rank_json(r: &RankReport) -> Value {
    json!({
        "rank": r.rank,
        "depth": r.depth,
        "dim": r.dim,
        "words": r.words,
        "tolerance": num(r.tolerance),
        "point": nums(&r.point),
    })
}

fn classification_json(c: &Classification) -> Value {
    json!({ "label": c.label, "notes": c.notes })
}

fn measurements_json(m: &Measurements) -> Value {
    json!({
        "ordering_evaluated": m.ordering_evaluated,
        "ordering_holds": m.ordering_holds,
        "curvature_gap": opt_num(m.curvature_gap),
        "touching": m.touching,
        "coincide": m.coincide,
        "rank": m.rank,
        "rank_target": m.rank_target,
        "singular_touch": m.singular_touch,
    })
}

pub fn scenario_json(r: &ScenarioReport) -> Value {
    let mut o = Map::new();
    o.insert("schema_version".into(), json!(SCHEMA_VERSION));
    o.insert(
        "scenario".into(),
        json!({
            "name": r.scenario,
            "description": r.description,
            "operator": r.operator,
            "chart": r.chart,
            "u": r.u,
            "v": r.v,
        }),
    );
    o.insert("grid".into(), grid_json(&r.grid));
    let mut tol = tolerances_json(&r.tolerances);
    if let Value::Object(t) = &mut tol {
        t.insert("T".into(), num(r.horizon));
        t.insert("step".into(), num(r.step));
        t.insert("max_depth".into(), json!(r.max_depth));
    }
    o.insert("tolerances".into(), tol);
    o.insert(
        "ordering".into(),
        json!({
            "holds": r.ordering.holds,
            "swapped": r.ordering.swapped,
            "evaluated": r.ordering.evaluated,
            "min_v_minus_u": num(r.ordering.min_gap),
            "argmin": nums(&r.ordering.argmin),
            "max_v_minus_u": num(r.ordering.max_gap),
        }),
    );
    o.insert(
        "touching".into(),
        Value::Array(
            r.touching
                .iter()
                .map(|t| {
                    json!({
                        "index": t.index,
                        "point": nums(&t.point),
                        "grid_point": nums(&t.grid_point),
                        "v_minus_u": num(t.gap),
                        "refined": t.refined,
                    })
                })
                .collect(),
        ),
    );
    o.insert("curvature_gap".into(), opt_num(r.curvature_gap));
    o.insert("curvature_gap_witness".into(), r.gap_witness.as_deref().map_or(Value::Null, nums));
    o.insert("curvature_skipped_points".into(), json!(r.gap_skipped));
    o.insert("singular_fraction_u".into(), num(r.singular_u.fraction));
    o.insert("singular_fraction_v".into(), num(r.singular_v.fraction));
    for (key, s) in [("singular_u", &r.singular_u), ("singular_v", &r.singular_v)] {
        o.insert(
            key.into(),
            json!({
                "cells": s.cells,
                "clusters": s.clusters,
                "representatives": s.representatives.iter().map(|p| nums(p)).collect::<Vec<_>>(),
            }),
        );
    }
    let mut rank = r.rank.as_ref().map_or(Value::Null, rank_json);
    if let Value::Object(m) = &mut rank {
        m.insert("target".into(), json!(r.rank_target));
        m.insert("evaluated_points".into(), json!(r.rank_points));
    }
    o.insert("rank".into(), rank);
    o.insert("rank_note".into(), r.rank_note.as_ref().map_or(Value::Null, |s| json!(s)));
    o.insert("coincide_near_touching".into(), json!(r.coincide));
    o.insert(
        "propagation".into(),
        Value::Array(
            r.propagation
                .runs
                .iter()
                .map(|p| {
                    json!({
                        "start": nums(&p.start),
                        "field": p.field,
                        "direction": p.direction,
                        "steps": p.steps,
                        "max_abs_v_minus_u": num(p.max_gap),
                        "first_violation": p.first_violation,
                        "exited_box": p.exited_box,
                        "aborted": p.aborted,
                    })
                })
                .collect(),
        ),
    );
    o.insert("propagation_holds".into(), json!(r.propagation.holds()));
    o.insert("measurements".into(), measurements_json(&r.measurements()));
    o.insert("classification".into(), classification_json(&r.classification));
    Value::Object(o)
}

/// Pretty JSON with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn read_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Null => None,
        other => other.as_f64(),
    }
}

/// Recomputes the classification from the `measurements` and `tolerances`
/// recorded in a report file.
pub fn reclassify_json(report: &Value) -> Option<Value> {
    let m = report.get("measurements")?;
    let t = report.get("tolerances")?;
    let meas = Measurements {
        ordering_evaluated: m.get("ordering_evaluated")?.as_bool()?,
        ordering_holds: m.get("ordering_holds")?.as_bool()?,
        curvature_gap: read_f64(m.get("curvature_gap")?),
        touching: m.get("touching")?.as_u64()? as usize,
        coincide: m.get("coincide")?.as_bool()?,
        rank: m.get("rank")?.as_u64().map(|r| r as usize),
        rank_target: m.get("rank_target")?.as_u64()? as usize,
        singular_touch: m.get("singular_touch")?.as_bool()?,
    };
    let tol = Tolerances {
        eps_touch: t.get("eps_touch")?.as_f64()?,
        eps_order: t.get("eps_order")?.as_f64()?,
        eps_h: t.get("eps_H")?.as_f64()?,
        eps_sing: t.get("eps_sing")?.as_f64()?,
    };
    Some(classification_json(&classify(&meas, &tol)))
}

fn csv_cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt17)
}

/// Per-point table: chart coordinates, `v − u`, `H(u)`, `H(v)` and singular
/// flags, one row per grid point in index order.
pub fn scenario_csv(r: &ScenarioReport) -> String {
    let su: BTreeSet<usize> = r.singular_u.indices.iter().copied().collect();
    let sv: BTreeSet<usize> = r.singular_v.indices.iter().copied().collect();
    let mut out = String::new();
    for c in &r.chart {
        out.push_str(c);
        out.push(',');
    }
    out.push_str("v_minus_u,H_u,H_v,singular_u,singular_v\n");
    for i in 0..r.grid.len() {
        for x in r.grid.point(i) {
            out.push_str(&fmt17(x));
            out.push(',');
        }
        let row = &r.curvatures[i];
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_cell(r.differences[i]),
            csv_cell(row.h_u),
            csv_cell(row.h_v),
            u8::from(su.contains(&i)),
            u8::from(sv.contains(&i))
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(1.0), "1.0000000000000000");
        assert_eq!(fmt17(0.1), "0.10000000000000001");
        assert_eq!(fmt17(-123.5), "-123.50000000000000");
        assert_eq!(fmt17(1e-7), "9.9999999999999995e-08");
        assert_eq!(fmt17(2.5e20), "2.5000000000000000e+20");
        assert_eq!(fmt17(0.0), "0.0000000000000000");
        for x in [std::f64::consts::PI, 1.0 / 3.0, 1e-300, 6.02e23, -4.2e-6] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn numbers_keep_their_text() {
        let v = json!({ "a": num(0.5), "b": num(f64::NAN) });
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"a":0.50000000000000000,"b":null}"#);
    }
}
