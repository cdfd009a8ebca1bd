//! A small expression language for potentials on `[−R, R]^n`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' UINT)?
//! atom   := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'
//! VAR    := x | y | z | x1 | x2 | ...
//! FUNC   := exp | log
//! ```
//!
//! `x`, `y`, `z` name coordinates 1, 2, 3; `xk` names coordinate `k`. `log`
//! is guarded: arguments below the smallest positive double are clamped.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected {:?} after a complete expression",
                p.tokens[p.pos]
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k as i32),
            Expr::Exp(a) => a.eval(x).exp(),
            Expr::Log(a) => a.eval(x).max(f64::MIN_POSITIVE).ln(),
        }
    }

    /// Number of coordinates referenced: one more than the largest index.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.arity().max(b.arity()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // Exponent part: 1e-3, 2.5E+4.
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number {s:?}")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self, op: char) -> bool {
        matches!(self.tokens.get(self.pos), Some(Token::Op(c)) if *c == op)
    }

    fn expect_op(&mut self, op: char) -> Result<()> {
        if self.peek_op(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expression(format!(
                "expected {op:?}, found {:?}",
                self.tokens.get(self.pos)
            )))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.peek_op('+') {
                self.pos += 1;
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.peek_op('-') {
                self.pos += 1;
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.peek_op('*') {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.peek_op('^') {
            return Ok(base);
        }
        self.pos += 1;
        match self.tokens.get(self.pos) {
            Some(Token::Num(k)) if k.fract() == 0.0 && *k >= 0.0 && *k <= 64.0 => {
                self.pos += 1;
                Ok(Expr::Pow(Box::new(base), *k as u32))
            }
            other => Err(Error::Expression(format!(
                "exponent must be an integer literal in 0..=64, found {other:?}"
            ))),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "exp" | "log" => {
                    self.expect_op('(')?;
                    let e = Box::new(self.expr()?);
                    self.expect_op(')')?;
                    Ok(if name == "exp" { Expr::Exp(e) } else { Expr::Log(e) })
                }
                "x" => Ok(Expr::Var(0)),
                "y" => Ok(Expr::Var(1)),
                "z" => Ok(Expr::Var(2)),
                _ => match name.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                    Some(k) if k >= 1 => Ok(Expr::Var(k - 1)),
                    _ => Err(Error::Expression(format!("unknown identifier {name:?}"))),
                },
            },
            Token::Op(c) => Err(Error::Expression(format!("unexpected {c:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("10 - 4 - 3", &[]), 3.0);
        assert_eq!(ev("-x^2", &[3.0]), -9.0);
        assert_eq!(ev("2 * -x", &[3.0]), -6.0);
        assert_eq!(ev("1.5e1 + 2E-1", &[]), 15.2);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("x*y", &[2.0, 5.0]), 10.0);
        assert_eq!(ev("x1 + x3", &[1.0, 0.0, 4.0]), 5.0);
        assert!((ev("exp(-(x^2 + y^2))", &[1.0, 0.0]) - (-1f64).exp()).abs() < 1e-16);
        assert!((ev("log(1 + x^2)", &[1.0]) - 2f64.ln()).abs() < 1e-16);
        assert_eq!(ev("log(0)", &[]), f64::MIN_POSITIVE.ln());
        assert_eq!(Expr::parse("x*z + 1").unwrap().arity(), 3);
        assert_eq!(Expr::parse("2").unwrap().arity(), 0);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["", "x +", "(x", "x)", "x^y", "x^1.5", "sin(x)", "x0", "2 $ 3", "x y"] {
            assert!(matches!(Expr::parse(bad), Err(Error::Expression(_))), "{bad:?}");
        }
    }
}
