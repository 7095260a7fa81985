use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use subcurv::calculus::{parse_expr, Compiled, Expr};
use subcurv::heisenberg::numbered_coords;
use subcurv::smp::{
    integrate_field, propagate_max, run_scenario, variation_check, ComparisonScenario, GraphOperator,
};
use subcurv::{DomainBox, GridSpec, VectorFieldExpr};

fn h1_scenario(grid: usize, u: &str, v: &str) -> ComparisonScenario {
    let c = numbered_coords(2).unwrap();
    let f = vec![parse_expr("-x2", &c).unwrap(), parse_expr("x1", &c).unwrap()];
    let domain = DomainBox::new(vec![(0.5, 1.5), (-0.25, 0.25)]).unwrap();
    ComparisonScenario::new(
        "h1",
        GraphOperator::GraphHF { f },
        c.clone(),
        parse_expr(u, &c).unwrap(),
        parse_expr(v, &c).unwrap(),
        GridSpec::uniform(domain, grid).unwrap(),
    )
}

fn gap_fn(u: &str, v: &str) -> impl Fn(&[f64]) -> Option<f64> + Sync {
    let c = numbered_coords(2).unwrap();
    let d = Compiled::new(&(&parse_expr(v, &c).unwrap() - &parse_expr(u, &c).unwrap()));
    move |x: &[f64]| d.eval(x).ok().map(f64::abs)
}

fn constant_field(components: &[i64]) -> VectorFieldExpr {
    VectorFieldExpr::new(components.iter().map(|&k| Expr::rational(k, 1)).collect())
}

#[test]
fn counterexample_is_stable_under_refinement() {
    let coarse = run_scenario(&h1_scenario(65, "x1*x2 + x2^2", "x1*x2")).unwrap();
    let fine = run_scenario(&h1_scenario(129, "x1*x2 + x2^2", "x1*x2")).unwrap();
    assert_eq!(coarse.classification, fine.classification);
    assert_eq!(fine.classification.label, "counterexample-detected;rank-condition-failed");
    assert_eq!(fine.touching.len(), 129);
    assert!(fine.touching.iter().all(|t| t.point[1].abs() < 1e-12));
}

#[test]
fn swapping_the_pair_negates_gap_and_margin() {
    let a = run_scenario(&h1_scenario(17, "x1*x2 + x2^2", "x1*x2")).unwrap();
    let b = run_scenario(&h1_scenario(17, "x1*x2", "x1*x2 + x2^2")).unwrap();
    assert_ne!(a.ordering.swapped, b.ordering.swapped);
    assert_eq!(a.ordering.min_gap, b.ordering.min_gap);
    assert_eq!(a.classification, b.classification);
    let c = numbered_coords(2).unwrap();
    let op = GraphOperator::GraphHF { f: vec![parse_expr("-x2", &c).unwrap(), parse_expr("x1", &c).unwrap()] };
    let u = parse_expr("x1^2/4 + x2", &c).unwrap();
    let v = parse_expr("x1*x2 + 1", &c).unwrap();
    let grid = GridSpec::uniform(DomainBox::new(vec![(0.5, 1.5), (-0.25, 0.25)]).unwrap(), 9).unwrap();
    let g1 = subcurv::smp::curvature_gap_of(&op, &u, &v, &grid, 1e-7).unwrap();
    let g2 = subcurv::smp::curvature_gap_of(&op, &v, &u, &grid, 1e-7).unwrap();
    for (r1, r2) in g1.rows.iter().zip(&g2.rows) {
        assert_eq!((r1.h_u, r1.h_v), (r2.h_v, r2.h_u));
    }
}

#[test]
fn axis_orbit_keeps_the_pair_together() {
    let gap = gap_fn("x1*x2 + x2^2", "x1*x2");
    let r = propagate_max(&gap, &[constant_field(&[1, 0])], &[1.0, 0.0], 1.0, 1e-3, 1e-6, false).unwrap();
    assert!(r.holds());
    assert!(r.max_gap() <= 1e-9, "{}", r.max_gap());
    assert!(r.runs.iter().all(|run| run.steps == 1000));
}

#[test]
fn transverse_violation_is_detected_quickly() {
    let gap = gap_fn("x1*x2", "x1*x2 + x2^2");
    let r = propagate_max(&gap, &[constant_field(&[0, 1])], &[1.0, 0.0], 1.0, 1e-3, 1e-6, false).unwrap();
    assert!(!r.holds());
    for run in &r.runs {
        assert!(run.first_violation.is_some_and(|k| k <= 5), "{run:?}");
    }
}

#[test]
fn rk4_error_ratio_under_step_halving() {
    let c = numbered_coords(2).unwrap();
    let x = VectorFieldExpr::new(vec![parse_expr("-x2", &c).unwrap(), parse_expr("x1", &c).unwrap()]);
    let err = |h: f64| {
        let end = integrate_field(&x, &[1.0, 0.0], FRAC_PI_2, h).unwrap();
        let p = end.end();
        (p[0].powi(2) + (p[1] - 1.0).powi(2)).sqrt()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((8.0..=32.0).contains(&ratio), "{ratio}");
    assert!(err(1e-3) < 1e-8);
}

#[test]
fn weak_form_residual_converges() {
    let c = numbered_coords(2).unwrap();
    let f = vec![parse_expr("-x2", &c).unwrap(), parse_expr("x1", &c).unwrap()];
    let bump = parse_expr("((x1 - 1/2)*(3/2 - x1)*(x2 - 1/2)*(3/2 - x2))^2", &c).unwrap();
    let d = DomainBox::new(vec![(0.5, 1.5); 2]).unwrap();
    for src in ["x1*x2", "x1*x2 + x2^2"] {
        let u = parse_expr(src, &c).unwrap();
        let r64 = variation_check(&f, &u, &bump, &d, 64).unwrap();
        let r128 = variation_check(&f, &u, &bump, &d, 128).unwrap();
        assert!(r64 <= 2e-2 && r128 <= 1e-2, "{src}: {r64} {r128}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn identical_pairs_propagate(a in -2i64..=2, b in -2i64..=2, k in 0usize..9) {
        let u = format!("{a}*x1*x2 + {b}*x2^2 + x1");
        let s = h1_scenario(9, &u, &u);
        let r = run_scenario(&s).unwrap();
        prop_assert!(r.coincide);
        prop_assert!(r.propagation.holds());
        prop_assert_eq!(r.touching.len(), 81);
        let gap = gap_fn(&u, &u);
        let start = s.grid.point(k * 9 + k);
        let run = propagate_max(&gap, &[constant_field(&[1, 1])], &start, 0.5, 1e-2, 1e-6, false).unwrap();
        prop_assert_eq!(run.max_gap(), 0.0);
    }
}

#[test]
fn weak_form_residual_shrinks_with_refinement() {
    let c = numbered_coords(2).unwrap();
    let f = vec![parse_expr("-x2", &c).unwrap(), parse_expr("x1", &c).unwrap()];
    let bump = parse_expr("((x1 - 1/2)*(3/2 - x1)*(x2 - 1/2)*(3/2 - x2))^2", &c).unwrap();
    let d = DomainBox::new(vec![(0.5, 1.5); 2]).unwrap();
    let u = parse_expr("x1^2 + x2^3/3", &c).unwrap();
    let r: Vec<f64> = [16, 32, 64, 128].iter().map(|&k| variation_check(&f, &u, &bump, &d, k).unwrap()).collect();
    assert!(r[2] <= 2e-2 && r[3] <= 1e-2, "{r:?}");
    for w in r.windows(2) {
        assert!(w[1] <= 0.5 * w[0], "{r:?}");
    }
}
