use thiserror::Error;

/// Failures while building or parsing expressions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} is not a rational constant")]
    NonRationalExponent { offset: usize },
    #[error("invalid coordinates: {0}")]
    Coordinates(String),
}

/// Failures while evaluating an expression at a point.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("non-smooth point: non-integer power of non-positive base {base}")]
    NonSmoothPoint { base: f64 },
    #[error("division by zero: negative power of zero")]
    DivisionByZero,
    #[error("point has {got} coordinates, expression needs {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Errors raised by the geometric engine, bracket machinery and harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("singular point: |dφ|* < {}", c_style_exp(*.eps))]
    SingularPoint { eps: f64, conorm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("structure has no frame fields")]
    MissingFrames,
    #[error("matrix is not skew-symmetric")]
    NotSkew,
    #[error("frame inconsistency: {0}")]
    FrameInconsistency(String),
    #[error("invalid structure: {0}")]
    InvalidStructure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// `1e-7` -> `1e-07`, the printf `%.0e` layout used in diagnostics.
pub(crate) fn c_style_exp(v: f64) -> String {
    let s = format!("{v:e}");
    match s.split_once('e') {
        Some((mant, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ("-", d),
                None => ("+", exp),
            };
            format!("{mant}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_message_layout() {
        let e = Error::SingularPoint { eps: 1e-7, conorm: 0.0 };
        assert_eq!(e.to_string(), "singular point: |dφ|* < 1e-07");
        assert_eq!(c_style_exp(2.5e12), "2.5e+12");
    }
}
