//! Parser and pretty-printer for the field-system text grammar.
//!
//! ```text
//! vars x, y;
//! field 1, 0;
//! field 0, x;
//! ```
//!
//! Components are polynomial expressions in `+ - * ^` with integer or
//! rational (`p/q`) literals. General division is not part of the grammar,
//! which keeps everything inside the polynomial ring.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::field::{FieldSystem, PolyVectorField};
use crate::poly::Poly;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
    Comma,
    Semi,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (l, co) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '#' {
            // comment to end of line
            while let Some(&c2) = chars.peek() {
                bump(&mut chars);
                if c2 == '\n' {
                    break;
                }
            }
            continue;
        }
        let tok = if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&c2) = chars.peek() {
                if c2.is_ascii_digit() {
                    s.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            Tok::Int(s.parse().unwrap())
        } else if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c2) = chars.peek() {
                if c2.is_alphanumeric() || c2 == '_' {
                    s.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            Tok::Ident(s)
        } else {
            let t = match c {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '^' => Tok::Caret,
                '/' => Tok::Slash,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                _ => {
                    return Err(Error::Syntax {
                        line: l,
                        col: co,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            };
            bump(&mut chars);
            t
        };
        out.push(Spanned { tok, line: l, col: co });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    vars: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let t = self.peek();
        Err(Error::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Poly> {
        let mut acc = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.next();
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.next();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    // term := factor ('*' factor)*
    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.factor()?;
        while self.peek().tok == Tok::Star {
            self.next();
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    // factor := ('-')* atom ('^' int)?
    fn factor(&mut self) -> Result<Poly> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(self.factor()?.neg());
        }
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.next();
            match self.next().tok {
                Tok::Int(e) => {
                    let e: u32 = e
                        .try_into()
                        .map_err(|_| Error::Config("exponent too large".into()))?;
                    Ok(base.pow(e))
                }
                _ => self.err("expected non-negative integer exponent after `^`"),
            }
        } else {
            Ok(base)
        }
    }

    // atom := int ('/' int)? | var | '(' expr ')'
    fn atom(&mut self) -> Result<Poly> {
        let n = self.vars.len();
        match self.next().tok {
            Tok::Int(num) => {
                if self.peek().tok == Tok::Slash {
                    self.next();
                    match self.next().tok {
                        Tok::Int(den) => {
                            if den == BigInt::from(0) {
                                return self.err("zero denominator in rational literal");
                            }
                            Ok(Poly::constant(n, BigRational::new(num, den)))
                        }
                        _ => self.err("expected integer denominator"),
                    }
                } else {
                    Ok(Poly::constant(n, BigRational::from_integer(num)))
                }
            }
            Tok::Ident(name) => {
                let idx = self.var_index(&name)?;
                Ok(Poly::var(n, idx))
            }
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "closing parenthesis")?;
                Ok(e)
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.err("expected literal, variable, or parenthesized expression")
            }
        }
    }
}

/// Parse a field-system declaration into canonical `Poly` form.
pub fn parse_field_system(text: &str) -> Result<FieldSystem> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        vars: Vec::new(),
    };

    // vars statement
    match p.next().tok {
        Tok::Ident(kw) if kw == "vars" => {}
        _ => {
            p.pos = 0;
            return p.err("expected `vars` declaration");
        }
    }
    loop {
        match p.next().tok {
            Tok::Ident(name) => {
                if p.vars.contains(&name) {
                    p.pos -= 1;
                    return p.err(format!("duplicate variable `{name}`"));
                }
                p.vars.push(name);
            }
            _ => {
                p.pos = p.pos.saturating_sub(1);
                return p.err("expected variable name");
            }
        }
        match p.next().tok {
            Tok::Comma => continue,
            Tok::Semi => break,
            _ => {
                p.pos = p.pos.saturating_sub(1);
                return p.err("expected `,` or `;` in vars list");
            }
        }
    }
    let n = p.vars.len();

    // field statements
    let mut fields = Vec::new();
    loop {
        match p.next().tok {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "field" => {}
            _ => {
                p.pos = p.pos.saturating_sub(1);
                return p.err("expected `field` declaration");
            }
        }
        let mut comps = Vec::new();
        loop {
            comps.push(p.expr()?);
            match p.peek().tok {
                Tok::Comma => {
                    p.next();
                }
                Tok::Semi => {
                    p.next();
                    break;
                }
                Tok::Eof => break,
                _ => return p.err("expected `,` or `;` after field component"),
            }
        }
        if comps.len() != n {
            return Err(Error::ComponentCount {
                expected: n,
                got: comps.len(),
            });
        }
        fields.push(PolyVectorField::new(comps));
    }
    let vars = p.vars.clone();
    FieldSystem::new(vars, fields)
}

/// Canonical pretty-printer; its output re-parses to an equal system.
pub fn print_field_system(sys: &FieldSystem) -> String {
    let mut out = format!("vars {};\n", sys.variables.join(", "));
    for f in &sys.fields {
        let comps: Vec<String> = f
            .coeffs()
            .iter()
            .map(|p| p.display(&sys.variables).to_string())
            .collect();
        out.push_str(&format!("field {};\n", comps.join(", ")));
    }
    out
}
