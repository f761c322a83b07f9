//! Recursive-descent parser for the expression mini-language.
//!
//! Grammar (whitespace insignificant):
//! ```text
//! expr    := ["-"] term (("+" | "-") term)*
//! term    := factor (("*" | "/") factor)*
//! factor  := atom ("^" intLiteral)?
//! atom    := number | "i" | "pi" | var
//!          | "conj(" expr ")" | "abs(" expr ")"
//!          | "pow(" expr "," realExpr "," realExpr "," realExpr ")"
//!          | "(" expr ")"
//! var     := z1 | z2 | z3 | w1 | w2 | w3 | zeta
//! ```
//! `realExpr` is an expr that folds to a real constant (it admits `pi`).
//! Syntax errors carry the byte offset of the offending token.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{CExpr, Var};

pub fn parse(text: &str) -> Result<CExpr> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, ch: u8) -> bool {
        if self.peek() == Some(ch) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.eat(ch) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", ch as char)))
        }
    }

    fn expr(&mut self) -> Result<CExpr> {
        let negate = self.eat(b'-');
        let mut acc = self.term()?;
        if negate {
            acc = CExpr::neg(acc);
        }
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                acc = CExpr::add(acc, rhs);
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                acc = CExpr::sub(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<CExpr> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.factor()?;
                acc = CExpr::mul(acc, rhs);
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                acc = CExpr::div(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<CExpr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let n = self.int_literal()?;
            return Ok(CExpr::int_pow(base, n));
        }
        Ok(base)
    }

    fn int_literal(&mut self) -> Result<i32> {
        let negate = self.eat(b'-');
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected integer literal after `^`"));
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        self.skip_ws();
        let value: i32 = digits
            .parse()
            .map_err(|_| self.err("integer literal out of range"))?;
        Ok(if negate { -value } else { value })
    }

    fn atom(&mut self) -> Result<CExpr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            _ => Err(self.err("expected number, variable, function, or `(`")),
        }
    }

    fn number(&mut self) -> Result<CExpr> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        // exponent part: only when followed by digits (so `2e` fails cleanly)
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            offset: start,
            message: format!("invalid number `{text}`"),
        })?;
        self.skip_ws();
        Ok(CExpr::real(value))
    }

    fn identifier(&mut self) -> Result<CExpr> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .to_string();
        self.skip_ws();
        match name.as_str() {
            "i" => Ok(CExpr::constant(Complex64::new(0.0, 1.0))),
            "pi" => Ok(CExpr::real(PI)),
            "conj" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(CExpr::conj(e))
            }
            "abs" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(CExpr::abs(e))
            }
            "pow" => {
                self.expect(b'(')?;
                let base = self.expr()?;
                self.expect(b',')
                    .map_err(|_| self.err("branch power requires exponent and argument range"))?;
                let exponent = self.real_expr()?;
                self.expect(b',')
                    .map_err(|_| self.err("branch power is missing its argument range"))?;
                let lo = self.real_expr()?;
                self.expect(b',')
                    .map_err(|_| self.err("branch power is missing the upper argument bound"))?;
                let hi = self.real_expr()?;
                self.expect(b')')?;
                CExpr::branch_pow(base, exponent, lo, hi)
            }
            _ => {
                if let Some(v) = Var::from_name(&name) {
                    Ok(CExpr::var(v))
                } else {
                    Err(Error::UnknownIdentifier {
                        name,
                        offset: start,
                    })
                }
            }
        }
    }

    /// Parses an expr and folds it to  a real constant.
    fn real_expr(&mut self) -> Result<f64> {
        let offset = self.pos;
        let e = self.expr()?;
        let p = crate::expr::Point::new();
        let v = e.eval(&p).map_err(|_| Error::Parse {
            offset,
            message: "expected a constant real expression".into(),
        })?;
        if v.im.abs() > 1e-12 {
            return Err(Error::Parse {
                offset,
                message: format!("expected a real constant, got imaginary part {}", v.im),
            });
        }
        Ok(v.re)
    }
}
