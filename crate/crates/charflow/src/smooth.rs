//! Smooth (including flat non-analytic) coefficient expressions for the
//! numerical engine.
//!
//! The AST covers rational constants, variables, `+ - * /` (protected
//! division), integer powers, `sin`, `cos`, `exp`, and the flat
//! primitives `flat2(u) = exp(-1/u^2)` and `flatabs(u) = exp(-1/|u|)`,
//! both extended by 0 at u = 0. The flat primitives evaluate to exactly 0
//! below the underflow threshold 1e-8, matching their infinite-order
//! vanishing.

use crate::error::{Error, Result};

/// Exact-zero threshold for the flat primitives.
pub const FLAT_UNDERFLOW: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum SmoothExpr {
    Const(f64),
    Var(usize),
    Add(Box<SmoothExpr>, Box<SmoothExpr>),
    Sub(Box<SmoothExpr>, Box<SmoothExpr>),
    Mul(Box<SmoothExpr>, Box<SmoothExpr>),
    Div(Box<SmoothExpr>, Box<SmoothExpr>),
    Neg(Box<SmoothExpr>),
    Pow(Box<SmoothExpr>, i32),
    Sin(Box<SmoothExpr>),
    Cos(Box<SmoothExpr>),
    Exp(Box<SmoothExpr>),
    Flat2(Box<SmoothExpr>),
    FlatAbs(Box<SmoothExpr>),
}

impl SmoothExpr {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            SmoothExpr::Const(c) => *c,
            SmoothExpr::Var(i) => x[*i],
            SmoothExpr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            SmoothExpr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            SmoothExpr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            SmoothExpr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(Error::Eval("division by zero".into()));
                }
                a.eval(x)? / d
            }
            SmoothExpr::Neg(a) => -a.eval(x)?,
            SmoothExpr::Pow(a, e) => a.eval(x)?.powi(*e),
            SmoothExpr::Sin(a) => a.eval(x)?.sin(),
            SmoothExpr::Cos(a) => a.eval(x)?.cos(),
            SmoothExpr::Exp(a) => a.eval(x)?.exp(),
            SmoothExpr::Flat2(a) => {
                let u = a.eval(x)?;
                if u.abs() < FLAT_UNDERFLOW {
                    0.0
                } else {
                    (-1.0 / (u * u)).exp()
                }
            }
            SmoothExpr::FlatAbs(a) => {
                let u = a.eval(x)?;
                if u.abs() < FLAT_UNDERFLOW {
                    0.0
                } else {
                    (-1.0 / u.abs()).exp()
                }
            }
        })
    }
}

/// A vector field with smooth-expression components.
#[derive(Debug, Clone)]
pub struct SmoothVectorField {
    pub coeffs: Vec<SmoothExpr>,
}

impl SmoothVectorField {
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.coeffs.iter().map(|c| c.eval(x)).collect()
    }
}

/// Parse one smooth expression against a list of variable names.
pub fn parse_smooth_expr(src: &str, vars: &[String]) -> Result<SmoothExpr> {
    let mut p = SParser {
        src: src.as_bytes(),
        pos: 0,
        vars,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

/// Parse a comma-separated component list into a smooth vector field.
pub fn parse_smooth_field(src: &str, vars: &[String]) -> Result<SmoothVectorField> {
    let parts = split_top_level_commas(src);
    if parts.len() != vars.len() {
        return Err(Error::ComponentCount {
            expected: vars.len(),
            got: parts.len(),
        });
    }
    let coeffs = parts
        .iter()
        .map(|s| parse_smooth_expr(s, vars))
        .collect::<Result<Vec<_>>>()?;
    Ok(SmoothVectorField { coeffs })
}

fn split_top_level_commas(src: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in src.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth -= 1;
                cur.push(c);
            }
            ',' if depth == 0 => {
                parts.push(std::mem::take(&mut cur));
            }
            _ => cur.push(c),
        }
    }
    parts.push(cur);
    parts
}

struct SParser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

impl<'a> SParser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax {
            line: 1,
            col: self.pos + 1,
            msg: msg.to_string(),
        }
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

    fn expr(&mut self) -> Result<SmoothExpr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = SmoothExpr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = SmoothExpr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<SmoothExpr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = SmoothExpr::Mul(Box::new(acc), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc = SmoothExpr::Div(Box::new(acc), Box::new(self.factor()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<SmoothExpr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(SmoothExpr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let neg = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let n = self.number_literal()?;
            if n.fract() != 0.0 {
                return Err(self.err("integer exponent required"));
            }
            let mut e = n as i32;
            if neg {
                e = -e;
            }
            return Ok(SmoothExpr::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn number_literal(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected number"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("bad number literal"))
    }

    fn atom(&mut self) -> Result<SmoothExpr> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let n = self.number_literal()?;
                // rational literal p/q is handled by Div with constant args
                Ok(SmoothExpr::Const(n))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err(self.err("expected `)` after function argument"));
                    }
                    self.pos += 1;
                    let b = Box::new(arg);
                    return match name {
                        "sin" => Ok(SmoothExpr::Sin(b)),
                        "cos" => Ok(SmoothExpr::Cos(b)),
                        "exp" => Ok(SmoothExpr::Exp(b)),
                        "flat2" => Ok(SmoothExpr::Flat2(b)),
                        "flatabs" => Ok(SmoothExpr::FlatAbs(b)),
                        _ => Err(self.err(&format!("unknown function `{name}`"))),
                    };
                }
                match self.vars.iter().position(|v| v == name) {
                    Some(i) => Ok(SmoothExpr::Var(i)),
                    None => Err(Error::UnknownVariable(name.to_string())),
                }
            }
            _ => Err(self.err("expected expression")),
        }
    }
}
