use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{CheckedAdd, CheckedMul, One, Signed, Zero};

use super::number::{is_integer, Number, Rational};
use crate::error::ExprError;

/// Ordered, uniquely named coordinates of a chart.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoordSystem {
    names: Vec<String>,
}

impl CoordSystem {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, ExprError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(ExprError::Coordinates(format!(
                "need at least 2 coordinates, got {}",
                names.len()
            )));
        }
        Self::check_names(&names)?;
        Ok(Self { names })
    }

    /// A chart of any size, including a single coordinate. Used for graph charts
    /// (e.g. the radial variable) that live inside a larger structure.
    pub fn chart<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, ExprError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(ExprError::Coordinates("empty chart".into()));
        }
        Self::check_names(&names)?;
        Ok(Self { names })
    }

    fn check_names(names: &[String]) -> Result<(), ExprError> {
        for (i, name) in names.iter().enumerate() {
            let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid || name == "sqrt" {
                return Err(ExprError::Coordinates(format!("invalid coordinate name '{name}'")));
            }
            if names[..i].contains(name) {
                return Err(ExprError::Coordinates(format!("duplicate coordinate '{name}'")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// The first `count` coordinates as a chart.
    pub fn prefix(&self, count: usize) -> Result<Self, ExprError> {
        Self::chart(self.names[..count].iter().cloned())
    }
}

/// Expression node. Children are shared, so cloning an [`Expr`] is cheap.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Const(Number),
    Var(usize),
    Pow(Expr, Rational),
    Product(Vec<Expr>),
    Sum(Vec<Expr>),
    Neg(Expr),
}

/// Immutable symbolic expression over indexed coordinates.
///
/// The constructors ([`Expr::sum`], [`Expr::product`], [`Expr::pow`], ...)
/// apply a shallow simplification, so trees built through them are canonical:
/// constants folded, neutral elements dropped, nested sums and products
/// flattened, like terms and equal bases merged, children sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn constant(value: Number) -> Self {
        Self::from_node(Node::Const(value))
    }

    pub fn int(value: i64) -> Self {
        Self::constant(Number::int(value))
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Self::constant(Number::ratio(num, den))
    }

    pub fn float(value: f64) -> Self {
        Self::constant(Number::Float(value))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    pub fn var(index: usize) -> Self {
        Self::from_node(Node::Var(index))
    }

    /// Negation node without simplification.
    pub fn raw_neg(e: Expr) -> Self {
        Self::from_node(Node::Neg(e))
    }

    pub fn as_const(&self) -> Option<Number> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_one())
    }

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(c.neg()),
            Node::Neg(inner) => inner.clone(),
            Node::Sum(terms) => Expr::sum(terms.iter().map(Expr::neg)),
            _ => Expr::product([Expr::int(-1), self.clone()]),
        }
    }

    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut flat: Vec<Expr> = Vec::new();
        for t in terms {
            match t.node() {
                Node::Sum(inner) => flat.extend(inner.iter().cloned()),
                Node::Neg(inner) => flat.push(inner.neg()),
                _ => flat.push(t),
            }
        }
        let mut constant = Number::zero();
        let mut keyed: Vec<(Expr, Number)> = Vec::new();
        for t in flat {
            if let Some(c) = t.as_const() {
                constant = constant.add(c);
                continue;
            }
            let (coef, rest) = t.split_coefficient();
            keyed.push((rest, coef));
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<Expr> = Vec::new();
        let mut i = 0;
        while i < keyed.len() {
            let (rest, mut coef) = keyed[i].clone();
            let mut j = i + 1;
            while j < keyed.len() && keyed[j].0 == rest {
                coef = coef.add(keyed[j].1);
                j += 1;
            }
            if !coef.is_zero() {
                out.push(Expr::scaled(coef, rest));
            }
            i = j;
        }
        if !constant.is_zero() {
            out.push(Expr::constant(constant));
        }
        out.sort();
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap_or_else(Expr::zero),
            _ => Expr::from_node(Node::Sum(out)),
        }
    }

    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut flat: Vec<Expr> = Vec::new();
        let mut constant = Number::one();
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        stack.reverse();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Product(inner) => stack.extend(inner.iter().rev().cloned()),
                Node::Neg(inner) => {
                    constant = constant.neg();
                    stack.push(inner.clone());
                }
                Node::Const(c) => constant = constant.mul(*c),
                _ => flat.push(f),
            }
        }
        if constant.is_zero() {
            return Expr::zero();
        }
        let mut powers: Vec<(Expr, Rational)> = flat
            .into_iter()
            .map(|f| match f.node() {
                Node::Pow(base, exp) => (base.clone(), *exp),
                _ => (f, Rational::one()),
            })
            .collect();
        powers.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<Expr> = Vec::new();
        let mut i = 0;
        while i < powers.len() {
            let (base, mut exp) = powers[i].clone();
            let mut j = i + 1;
            while j < powers.len() && powers[j].0 == base {
                match exp.checked_add(&powers[j].1) {
                    Some(e) => exp = e,
                    None => {
                        out.push(Expr::pow(&base, exp));
                        exp = powers[j].1;
                    }
                }
                j += 1;
            }
            let merged = Expr::pow(&base, exp);
            match merged.node() {
                Node::Const(c) => constant = constant.mul(*c),
                Node::Product(inner) => {
                    for f in inner {
                        if let Some(c) = f.as_const() {
                            constant = constant.mul(c);
                        } else {
                            out.push(f.clone());
                        }
                    }
                }
                _ => out.push(merged),
            }
            i = j;
        }
        if constant.is_zero() {
            return Expr::zero();
        }
        out.sort();
        if !constant.is_one() || out.is_empty() {
            out.insert(0, Expr::constant(constant));
        }
        match out.len() {
            1 => out.pop().unwrap_or_else(Expr::one),
            _ => Expr::from_node(Node::Product(out)),
        }
    }

    pub fn pow(base: &Expr, exp: Rational) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base.clone();
        }
        match base.node() {
            Node::Const(c) => {
                if is_integer(&exp) {
                    if let Some(v) = c.powi(*exp.numer()) {
                        return Expr::constant(v);
                    }
                } else if c.is_one() {
                    return Expr::one();
                }
                Expr::from_node(Node::Pow(base.clone(), exp))
            }
            Node::Pow(inner, inner_exp) if is_integer(&exp) => match inner_exp.checked_mul(&exp) {
                Some(e) => Expr::pow(inner, e),
                None => Expr::from_node(Node::Pow(base.clone(), exp)),
            },
            Node::Product(factors) if is_integer(&exp) => {
                Expr::product(factors.iter().map(|f| Expr::pow(f, exp)))
            }
            Node::Neg(inner) if is_integer(&exp) => {
                let sign = if exp.numer() % 2 == 0 { Expr::one() } else { Expr::int(-1) };
                Expr::product([sign, Expr::pow(inner, exp)])
            }
            _ => Expr::from_node(Node::Pow(base.clone(), exp)),
        }
    }

    pub fn powi(&self, exp: i64) -> Expr {
        Expr::pow(self, Rational::from_integer(exp))
    }

    pub fn powr(&self, num: i64, den: i64) -> Expr {
        Expr::pow(self, Rational::new(num, den))
    }

    pub fn sqrt(&self) -> Expr {
        self.powr(1, 2)
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    /// Splits off a leading constant factor: `c * rest`.
    fn split_coefficient(&self) -> (Number, Expr) {
        if let Node::Product(factors) = self.node() {
            if let Some(c) = factors[0].as_const() {
                let rest: Vec<Expr> = factors[1..].to_vec();
                let rest = if rest.len() == 1 {
                    rest[0].clone()
                } else {
                    Expr::from_node(Node::Product(rest))
                };
                return (c, rest);
            }
        }
        (Number::one(), self.clone())
    }

    fn scaled(coef: Number, rest: Expr) -> Expr {
        if coef.is_one() {
            return rest;
        }
        let mut factors = vec![Expr::constant(coef)];
        match rest.node() {
            Node::Product(inner) => factors.extend(inner.iter().cloned()),
            _ => factors.push(rest),
        }
        Expr::from_node(Node::Product(factors))
    }

    /// Rebuilds the tree bottom-up through the simplifying constructors.
    pub fn simplify(&self) -> Expr {
        let mut memo = HashMap::new();
        self.map_bottom_up(&mut memo, &|e| match e.node() {
            Node::Var(i) => Some(Expr::var(*i)),
            _ => None,
        })
    }

    /// Replaces every coordinate `i` by `values[i]` and re-simplifies.
    pub fn compose(&self, values: &[Expr]) -> Expr {
        let mut memo = HashMap::new();
        self.map_bottom_up(&mut memo, &|e| match e.node() {
            Node::Var(i) => Some(values[*i].clone()),
            _ => None,
        })
    }

    /// Replaces a single coordinate.
    pub fn substitute(&self, var: usize, value: &Expr) -> Expr {
        let mut memo = HashMap::new();
        self.map_bottom_up(&mut memo, &|e| match e.node() {
            Node::Var(i) if *i == var => Some(value.clone()),
            Node::Var(i) => Some(Expr::var(*i)),
            _ => None,
        })
    }

    /// Renumbers coordinates through `map` (old index -> new index).
    pub fn reindex(&self, map: &[usize]) -> Expr {
        let mut memo = HashMap::new();
        self.map_bottom_up(&mut memo, &|e| match e.node() {
            Node::Var(i) => Some(Expr::var(map[*i])),
            _ => None,
        })
    }

    fn map_bottom_up(
        &self,
        memo: &mut HashMap<usize, Expr>,
        leaf: &dyn Fn(&Expr) -> Option<Expr>,
    ) -> Expr {
        if let Some(done) = memo.get(&self.ptr_id()) {
            return done.clone();
        }
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(_) => leaf(self).unwrap_or_else(|| self.clone()),
            Node::Neg(inner) => inner.map_bottom_up(memo, leaf).neg(),
            Node::Sum(terms) => {
                let terms: Vec<Expr> = terms.iter().map(|t| t.map_bottom_up(memo, leaf)).collect();
                Expr::sum(terms)
            }
            Node::Product(factors) => {
                let factors: Vec<Expr> =
                    factors.iter().map(|f| f.map_bottom_up(memo, leaf)).collect();
                Expr::product(factors)
            }
            Node::Pow(base, exp) => Expr::pow(&base.map_bottom_up(memo, leaf), *exp),
        };
        memo.insert(self.ptr_id(), out.clone());
        out
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(e) | Node::Pow(e, _) => e.max_var(),
            Node::Sum(c) | Node::Product(c) => c.iter().filter_map(Expr::max_var).max(),
        }
    }

    pub fn depends_on(&self, var: usize) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(i) => *i == var,
            Node::Neg(e) | Node::Pow(e, _) => e.depends_on(var),
            Node::Sum(c) | Node::Product(c) => c.iter().any(|e| e.depends_on(var)),
        }
    }

    /// Number of distinct nodes in the (shared) tree.
    pub fn node_count(&self) -> usize {
        fn walk(e: &Expr, seen: &mut std::collections::HashSet<usize>) {
            if !seen.insert(e.ptr_id()) {
                return;
            }
            match e.node() {
                Node::Const(_) | Node::Var(_) => {}
                Node::Neg(c) | Node::Pow(c, _) => walk(c, seen),
                Node::Sum(c) | Node::Product(c) => c.iter().for_each(|x| walk(x, seen)),
            }
        }
        let mut seen = std::collections::HashSet::new();
        walk(self, &mut seen);
        seen.len()
    }

    /// Writes the expression in the input grammar using `coords` for names.
    pub fn display<'a>(&'a self, coords: &'a CoordSystem) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, coords }
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs])
    }
}

impl Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::sum([self.clone(), rhs.clone()])
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs.neg()])
    }
}

impl Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sum([self.clone(), rhs.neg()])
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product([self, rhs])
    }
}

impl Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::product([self.clone(), rhs.clone()])
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    coords: &'a CoordSystem,
}

// Binding strength used for parenthesization: sum < product < unary minus < power < atom.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl ExprDisplay<'_> {
    fn prec(e: &Expr) -> u8 {
        match e.node() {
            Node::Const(Number::Rational(r)) if r.denom().is_one() && !r.is_negative() => PREC_ATOM,
            Node::Const(Number::Float(f)) if *f >= 0.0 => PREC_ATOM,
            Node::Const(_) => PREC_PRODUCT,
            Node::Var(_) => PREC_ATOM,
            Node::Pow(..) => PREC_POW,
            Node::Neg(_) => PREC_UNARY,
            Node::Product(_) => PREC_PRODUCT,
            Node::Sum(_) => PREC_SUM,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
        if Self::prec(e) < min_prec {
            write!(f, "(")?;
            self.write_bare(f, e)?;
            return write!(f, ")");
        }
        self.write_bare(f, e)
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
        match e.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(i) => match self.coords.names().get(*i) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "_{i}"),
            },
            Node::Neg(inner) => {
                write!(f, "-")?;
                self.write(f, inner, PREC_POW)
            }
            Node::Pow(base, exp) => {
                self.write(f, base, PREC_ATOM)?;
                write!(f, "^")?;
                if exp.denom().is_one() && !exp.is_negative() {
                    write!(f, "{}", exp.numer())
                } else {
                    write!(f, "({})", Number::Rational(*exp))
                }
            }
            Node::Product(factors) => {
                for (k, factor) in factors.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    // operands of '*' bind at least as tightly as unary minus
                    let min = if k == 0 { PREC_PRODUCT } else { PREC_UNARY };
                    if k > 0 && matches!(factor.node(), Node::Const(_)) && Self::prec(factor) < PREC_ATOM {
                        write!(f, "(")?;
                        self.write_bare(f, factor)?;
                        write!(f, ")")?;
                    } else {
                        self.write(f, factor, min)?;
                    }
                }
                Ok(())
            }
            Node::Sum(terms) => {
                for (k, term) in terms.iter().enumerate() {
                    if k > 0 {
                        let (coef, rest) = match term.as_const() {
                            Some(c) => (c, Expr::one()),
                            None => term.split_coefficient(),
                        };
                        if coef.is_negative() {
                            write!(f, " - ")?;
                            let magnitude = coef.neg();
                            if let Node::Const(_) = term.node() {
                                write!(f, "{magnitude}")?;
                            } else if magnitude.is_one() {
                                self.write(f, &rest, PREC_PRODUCT)?;
                            } else {
                                self.write(f, &Expr::scaled(magnitude, rest), PREC_PRODUCT)?;
                            }
                            continue;
                        }
                        write!(f, " + ")?;
                    }
                    self.write(f, term, PREC_PRODUCT)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.expr, PREC_SUM)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(0)
    }
    fn y() -> Expr {
        Expr::var(1)
    }

    #[test]
    fn like_terms_cancel() {
        let e = &y() - &y();
        assert!(e.is_zero());
        let e = Expr::sum([x(), x(), Expr::int(3) * x()]);
        assert_eq!(e, Expr::int(5) * x());
    }

    #[test]
    fn equal_bases_merge() {
        let e = Expr::product([x(), x().powi(2), y(), x().recip()]);
        assert_eq!(e, Expr::product([x().powi(2), y()]));
    }

    #[test]
    fn neutral_elements_and_zero() {
        assert_eq!(Expr::product([Expr::one(), x()]), x());
        assert!(Expr::product([Expr::zero(), x()]).is_zero());
        assert_eq!(Expr::sum([Expr::zero(), x()]), x());
        assert_eq!(x().powr(1, 2).powi(2), x());
        assert!(Expr::pow(&x(), Rational::zero()).is_one());
    }

    #[test]
    fn ordering_is_canonical() {
        let a = Expr::sum([x().powi(2), y()]);
        let b = Expr::sum([y(), x().powi(2)]);
        assert_eq!(a, b);
        let a = Expr::product([y(), x(), Expr::int(2)]);
        let b = Expr::product([Expr::int(2), x(), y()]);
        assert_eq!(a, b);
    }

    #[test]
    fn raw_negation_simplifies_away() {
        let raw = Expr::raw_neg(Expr::raw_neg(x()));
        assert_eq!(raw.simplify(), x());
        let raw = Expr::raw_neg(Expr::sum([x(), y()]));
        assert_eq!(raw.simplify(), Expr::sum([x().neg(), y().neg()]));
    }

    #[test]
    fn compose_substitutes_all_coordinates() {
        let e = Expr::sum([x().powi(2), y()]);
        let out = e.compose(&[y(), Expr::int(3)]);
        assert_eq!(out, Expr::sum([y().powi(2), Expr::int(3)]));
    }

    #[test]
    fn coord_system_rejects_duplicates() {
        assert!(CoordSystem::new(["x", "x"]).is_err());
        assert!(CoordSystem::new(["x"]).is_err());
        assert!(CoordSystem::chart(["r"]).is_ok());
        assert!(CoordSystem::new(["x", "2y"]).is_err());
    }
}
