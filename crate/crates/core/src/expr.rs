//! Closed-form scalar expressions over `+ - * / ^ sin cos exp`, a small set
//! of named variables and numeric constants. Used for operator coefficients
//! `a(x1), b(x1)`, concrete nonlinearities `f(u), g(u, du)` and noise fields.

use crate::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
    Neg(Arc<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Arc<Expr> {
        Arc::new(Expr::Num(v))
    }

    pub fn parse(src: &str) -> Result<Arc<Expr>> {
        Parser { src: src.as_bytes(), pos: 0 }.parse_all()
    }

    pub fn eval(&self, vars: &HashMap<&str, f64>) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => *vars
                .get(name.as_str())
                .unwrap_or_else(|| panic!("unbound variable {name}")),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, n) => a.eval(vars).powi(*n),
            Expr::Sin(a) => a.eval(vars).sin(),
            Expr::Cos(a) => a.eval(vars).cos(),
            Expr::Exp(a) => a.eval(vars).exp(),
            Expr::Neg(a) => -a.eval(vars),
        }
    }

    /// Evaluates an expression in the single variable `var`.
    pub fn eval1(&self, var: &str, x: f64) -> f64 {
        let mut m = HashMap::new();
        m.insert(var, x);
        self.eval(&m)
    }

    /// Names of variables that occur in the expression.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => out.push(n.clone()),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Neg(a) => {
                a.collect_vars(out)
            }
        }
    }

    /// Exact symbolic derivative with respect to `var`.
    pub fn diff(self: &Arc<Expr>, var: &str) -> Arc<Expr> {
        use Expr::*;
        match self.as_ref() {
            Num(_) => Expr::num(0.0),
            Var(n) => Expr::num(if n == var { 1.0 } else { 0.0 }),
            Add(a, b) => Arc::new(Add(a.diff(var), b.diff(var))),
            Sub(a, b) => Arc::new(Sub(a.diff(var), b.diff(var))),
            Mul(a, b) => Arc::new(Add(
                Arc::new(Mul(a.diff(var), b.clone())),
                Arc::new(Mul(a.clone(), b.diff(var))),
            )),
            Div(a, b) => Arc::new(Div(
                Arc::new(Sub(
                    Arc::new(Mul(a.diff(var), b.clone())),
                    Arc::new(Mul(a.clone(), b.diff(var))),
                )),
                Arc::new(Pow(b.clone(), 2)),
            )),
            Pow(a, n) => Arc::new(Mul(
                Arc::new(Mul(Expr::num(*n as f64), Arc::new(Pow(a.clone(), n - 1)))),
                a.diff(var),
            )),
            Sin(a) => Arc::new(Mul(Arc::new(Cos(a.clone())), a.diff(var))),
            Cos(a) => Arc::new(Neg(Arc::new(Mul(Arc::new(Sin(a.clone())), a.diff(var))))),
            Exp(a) => Arc::new(Mul(self.clone(), a.diff(var))),
            Neg(a) => Arc::new(Neg(a.diff(var))),
        }
    }

    /// n-th derivative.
    pub fn diff_n(self: &Arc<Expr>, var: &str, n: u32) -> Arc<Expr> {
        let mut e = self.clone();
        for _ in 0..n {
            e = e.diff(var);
        }
        e
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn parse_all(&mut self) -> Result<Arc<Expr>> {
        let e = self.sum()?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.err("trailing input"));
        }
        Ok(e)
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
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

    fn sum(&mut self) -> Result<Arc<Expr>> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = Arc::new(Expr::Add(acc, self.product()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = Arc::new(Expr::Sub(acc, self.product()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Arc<Expr>> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = Arc::new(Expr::Mul(acc, self.power()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc = Arc::new(Expr::Div(acc, self.power()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Arc<Expr>> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let neg = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected integer exponent"));
            }
            let n: i32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| self.err("bad exponent"))?;
            return Ok(Arc::new(Expr::Pow(base, if neg { -n } else { n })));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Arc<Expr>> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b'-') => {
                self.pos += 1;
                Ok(Arc::new(Expr::Neg(self.power()?)))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = text.parse().map_err(|_| self.err("bad number"))?;
                Ok(Expr::num(v))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
                match name.as_str() {
                    "sin" | "cos" | "exp" => {
                        if self.peek() != Some(b'(') {
                            return Err(self.err("expected '(' after function name"));
                        }
                        self.pos += 1;
                        let arg = self.sum()?;
                        if self.peek() != Some(b')') {
                            return Err(self.err("expected ')'"));
                        }
                        self.pos += 1;
                        Ok(Arc::new(match name.as_str() {
                            "sin" => Expr::Sin(arg),
                            "cos" => Expr::Cos(arg),
                            _ => Expr::Exp(arg),
                        }))
                    }
                    "pi" => Ok(Expr::num(std::f64::consts::PI)),
                    _ => Ok(Arc::new(Expr::Var(name))),
                }
            }
            _ => Err(self.err("expected expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("2 + 0.5*sin(x1)").unwrap();
        let v = e.eval1("x1", std::f64::consts::FRAC_PI_2);
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let e = Expr::parse("exp(0.3*cos(x1)) * x1^2 / (2 + x1)").unwrap();
        let de = e.diff("x1");
        let x = 0.7;
        let h = 1e-6;
        let fd = (e.eval1("x1", x + h) - e.eval1("x1", x - h)) / (2.0 * h);
        assert!((de.eval1("x1", x) - fd).abs() < 1e-7);
    }

    #[test]
    fn reports_error_position() {
        let err = Expr::parse("1 + sin(").unwrap_err();
        match err {
            Error::Parse { pos, .. } => assert!(pos >= 7),
            _ => panic!("wrong error kind"),
        }
    }

    #[test]
    fn negative_exponent() {
        let e = Expr::parse("x1^-2").unwrap();
        assert!((e.eval1("x1", 2.0) - 0.25).abs() < 1e-15);
    }
}
