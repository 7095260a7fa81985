use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, One, Signed, ToPrimitive, Zero};

/// Exact rational used for constants and exponents.
pub type Rational = Ratio<i64>;

/// Largest integer magnitude for which `i64 as f64` is exact.
const EXACT_F64_INT: i64 = 1 << 53;

/// A numeric constant: exact rational when representable, IEEE double otherwise.
#[derive(Clone, Copy, Debug)]
pub enum Number {
    Rational(Rational),
    Float(f64),
}

impl Number {
    pub fn int(v: i64) -> Self {
        Number::Rational(Rational::from_integer(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Number::Rational(Rational::new(num, den))
    }

    pub fn zero() -> Self {
        Number::int(0)
    }

    pub fn one() -> Self {
        Number::int(1)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Rational(r) => r.is_zero(),
            Number::Float(f) => *f == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Number::Rational(r) => r.is_one(),
            Number::Float(f) => *f == 1.0,
        }
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            Number::Rational(r) => Some(*r),
            Number::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Rational(r) => rational_to_f64(r),
            Number::Float(f) => *f,
        }
    }

    pub fn add(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => checked(a.checked_add(&b), a, b, |x, y| x + y),
            (a, b) => Number::Float(a.to_f64() + b.to_f64()),
        }
    }

    pub fn mul(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => checked(a.checked_mul(&b), a, b, |x, y| x * y),
            (a, b) => Number::Float(a.to_f64() * b.to_f64()),
        }
    }

    pub fn neg(self) -> Number {
        match self {
            Number::Rational(r) => match r.numer().checked_neg() {
                Some(n) => Number::Rational(Rational::new_raw(n, *r.denom())),
                None => Number::Float(-rational_to_f64(&r)),
            },
            Number::Float(f) => Number::Float(-f),
        }
    }

    /// Integer power; `None` when the result is undefined (zero to a negative power).
    pub fn powi(self, exp: i64) -> Option<Number> {
        if self.is_zero() && exp < 0 {
            return None;
        }
        match self {
            Number::Rational(r) => {
                let exact = i32::try_from(exp).ok().and_then(|e| checked_pow(r, e));
                Some(match exact {
                    Some(v) => Number::Rational(v),
                    None => Number::Float(rational_to_f64(&r).powf(exp as f64)),
                })
            }
            Number::Float(f) => Some(Number::Float(f.powf(exp as f64))),
        }
    }

    /// Builds the number a decimal literal denotes. Values whose digits fit in
    /// 53 bits stay exact; longer literals become the correctly rounded double.
    pub fn from_decimal(int_part: &str, frac_part: &str) -> Option<Number> {
        let digits = format!("{int_part}{frac_part}");
        let digits = digits.trim_start_matches('0');
        let scale = u32::try_from(frac_part.len()).ok()?;
        let num = if digits.is_empty() { Some(0) } else { digits.parse::<i64>().ok() };
        let den = 10i64.checked_pow(scale);
        if let (Some(num), Some(den)) = (num, den) {
            if num <= EXACT_F64_INT && den <= EXACT_F64_INT {
                return Some(Number::Rational(Rational::new(num, den)));
            }
        }
        let text = if frac_part.is_empty() {
            int_part.to_string()
        } else {
            format!("{int_part}.{frac_part}")
        };
        text.parse::<f64>().ok().map(Number::Float)
    }

    fn variant_rank(&self) -> u8 {
        match self {
            Number::Rational(_) => 0,
            Number::Float(_) => 1,
        }
    }
}

fn checked(
    exact: Option<Rational>,
    a: Rational,
    b: Rational,
    op: impl Fn(f64, f64) -> f64,
) -> Number {
    match exact {
        Some(v) => Number::Rational(v),
        None => Number::Float(op(rational_to_f64(&a), rational_to_f64(&b))),
    }
}

fn checked_pow(base: Rational, exp: i32) -> Option<Rational> {
    let (base, exp) = if exp < 0 {
        if base.is_zero() {
            return None;
        }
        (base.recip(), exp.checked_neg()?)
    } else {
        (base, exp)
    };
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc = acc.checked_mul(&base)?;
    }
    Some(acc)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    if r.denom().is_one() {
        return *r.numer() as f64;
    }
    let (n, d) = (*r.numer(), *r.denom());
    if n.abs() <= EXACT_F64_INT && d <= EXACT_F64_INT {
        n as f64 / d as f64
    } else {
        r.to_f64().unwrap_or(f64::NAN)
    }
}

pub fn is_integer(r: &Rational) -> bool {
    r.denom().is_one()
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Number {}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => a.cmp(b),
            (Number::Float(a), Number::Float(b)) => a.total_cmp(b),
            (a, b) => a.variant_rank().cmp(&b.variant_rank()),
        }
    }
}

impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Number::Rational(r) => {
                0u8.hash(state);
                r.numer().hash(state);
                r.denom().hash(state);
            }
            Number::Float(f) => {
                1u8.hash(state);
                f.to_bits().hash(state);
            }
        }
    }
}

impl fmt::Display for Number {
    /// Rationals print as `a` or `a/b`; doubles print in exponent form so they
    /// parse back as doubles.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Rational(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            Number::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Number::Float(v) => write!(f, "{v:e}"),
        }
    }
}

impl Number {
    pub fn is_negative(&self) -> bool {
        match self {
            Number::Rational(r) => r.is_negative(),
            Number::Float(f) => *f < 0.0,
        }
    }
}
