//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;            (* right-associative *)
//! atom    = number | ident | "sqrt" "(" expr ")" | "(" expr ")" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! Exponents must fold to a rational constant. Literals with an exponent part
//! are IEEE doubles; all other literals are exact.

use std::collections::HashMap;

use super::expr::{CoordSystem, Expr};
use super::number::Number;
use crate::error::ExprError;

/// Named sub-expressions an identifier may expand to (e.g. `rho`, `r2`).
pub type Macros = HashMap<String, Expr>;

pub fn parse_expr(source: &str, coords: &CoordSystem) -> Result<Expr, ExprError> {
    parse_expr_with(source, coords, &Macros::new())
}

pub fn parse_expr_with(source: &str, coords: &CoordSystem, macros: &Macros) -> Result<Expr, ExprError> {
    let mut parser = Parser { src: source.as_bytes(), pos: 0, coords, macros };
    let e = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.syntax("unexpected trailing input"));
    }
    Ok(e)
}

/// Parses a coordinate-free constant expression such as `-1/2` or `3.5`.
pub fn parse_constant(source: &str) -> Result<f64, ExprError> {
    let coords = CoordSystem::chart(["_"]).map_err(|e| ExprError::Syntax { offset: 0, message: e.to_string() })?;
    let e = parse_expr(source, &coords)?;
    if e.max_var().is_some() {
        return Err(ExprError::UnknownIdentifier { name: "_".into(), offset: 0 });
    }
    crate::calculus::evaluate(&e, &[0.0]).map_err(|err| ExprError::Syntax { offset: 0, message: err.to_string() })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    coords: &'a CoordSystem,
    macros: &'a Macros,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.peek() == Some(b'-') {
                self.pos += 1;
                terms.push(self.term()?.neg());
            } else {
                break;
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut factors = vec![self.unary()?];
        loop {
            if self.eat(b'*') {
                factors.push(self.unary()?);
            } else if self.eat(b'/') {
                factors.push(self.unary()?.recip());
            } else {
                break;
            }
        }
        Ok(Expr::product(factors))
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let start = self.pos;
        let exponent = self.unary()?;
        match exponent.as_const() {
            Some(Number::Rational(r)) => Ok(Expr::pow(&base, r)),
            _ => Err(ExprError::NonRationalExponent { offset: start }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.syntax("unexpected character")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn digits(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let int_part = self.digits().to_string();
        let mut frac_part = String::new();
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac_part = self.digits().to_string();
        }
        if int_part.is_empty() && frac_part.is_empty() {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mut p = self.pos + 1;
            if matches!(self.src.get(p), Some(b'+' | b'-')) {
                p += 1;
            }
            if self.src.get(p).is_some_and(u8::is_ascii_digit) {
                self.pos = p;
                self.digits();
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: "malformed number".into(),
                })?;
                return Ok(Expr::float(value));
            }
        }
        Number::from_decimal(&int_part, &frac_part)
            .map(Expr::constant)
            .ok_or(ExprError::Syntax { offset: start, message: "malformed number".into() })
    }

    fn identifier(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if name == "sqrt" {
            self.expect(b'(')?;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e.sqrt());
        }
        if let Some(i) = self.coords.index_of(name) {
            return Ok(Expr::var(i));
        }
        if let Some(e) = self.macros.get(name) {
            return Ok(e.clone());
        }
        Err(ExprError::UnknownIdentifier { name: name.to_string(), offset: start })
    }
}
