use std::collections::HashMap;

use super::expr::{Expr, Node};
use super::number::{is_integer, rational_to_f64, Rational};
use crate::error::EvalError;

/// Evaluates `e` at `point` (one value per coordinate).
pub fn evaluate(e: &Expr, point: &[f64]) -> Result<f64, EvalError> {
    Compiled::new(e).eval(point)
}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Var(usize),
    Neg(usize),
    Sum(Vec<usize>),
    Product(Vec<usize>),
    PowInt(usize, i32),
    Sqrt(usize),
    InvSqrt(usize),
    PowFrac(usize, f64),
}

/// Flattened evaluation tape with shared subtrees evaluated once.
#[derive(Clone, Debug)]
pub struct Compiled {
    ops: Vec<Op>,
    arity: usize,
}

impl Compiled {
    pub fn new(e: &Expr) -> Self {
        let mut ops = Vec::new();
        let mut slots = HashMap::new();
        emit(e, &mut ops, &mut slots);
        let arity = e.max_var().map_or(0, |m| m + 1);
        Self { ops, arity }
    }

    /// Minimum point length accepted by [`Compiled::eval`].
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        if point.len() < self.arity {
            return Err(EvalError::Dimension { expected: self.arity, got: point.len() });
        }
        let mut vals = vec![0.0; self.ops.len()];
        for (k, op) in self.ops.iter().enumerate() {
            vals[k] = match op {
                Op::Const(c) => *c,
                Op::Var(i) => point[*i],
                Op::Neg(a) => -vals[*a],
                Op::Sum(args) => args.iter().map(|a| vals[*a]).sum(),
                Op::Product(args) => args.iter().map(|a| vals[*a]).product(),
                Op::PowInt(a, n) => {
                    let b = vals[*a];
                    if b == 0.0 && *n < 0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    b.powi(*n)
                }
                Op::Sqrt(a) => {
                    let b = positive(vals[*a])?;
                    b.sqrt()
                }
                Op::InvSqrt(a) => {
                    let b = positive(vals[*a])?;
                    1.0 / b.sqrt()
                }
                Op::PowFrac(a, r) => positive(vals[*a])?.powf(*r),
            };
        }
        Ok(vals.last().copied().unwrap_or(0.0))
    }
}

fn positive(b: f64) -> Result<f64, EvalError> {
    if b > 0.0 {
        Ok(b)
    } else {
        Err(EvalError::NonSmoothPoint { base: b })
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>, slots: &mut HashMap<usize, usize>) -> usize {
    if let Some(&s) = slots.get(&e.ptr_id()) {
        return s;
    }
    let op = match e.node() {
        Node::Const(c) => Op::Const(c.to_f64()),
        Node::Var(i) => Op::Var(*i),
        Node::Neg(a) => Op::Neg(emit(a, ops, slots)),
        Node::Sum(c) => Op::Sum(c.iter().map(|x| emit(x, ops, slots)).collect()),
        Node::Product(c) => Op::Product(c.iter().map(|x| emit(x, ops, slots)).collect()),
        Node::Pow(base, exp) => {
            let b = emit(base, ops, slots);
            pow_op(b, exp)
        }
    };
    ops.push(op);
    let slot = ops.len() - 1;
    slots.insert(e.ptr_id(), slot);
    slot
}

fn pow_op(b: usize, exp: &Rational) -> Op {
    if is_integer(exp) {
        if let Ok(n) = i32::try_from(*exp.numer()) {
            return Op::PowInt(b, n);
        }
    }
    match (*exp.numer(), *exp.denom()) {
        (1, 2) => Op::Sqrt(b),
        (-1, 2) => Op::InvSqrt(b),
        _ => Op::PowFrac(b, rational_to_f64(exp)),
    }
}
