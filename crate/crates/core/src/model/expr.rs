//! User-supplied nonlinearities as arithmetic expressions in `t, x, y, z`.

use std::fmt;

use thiserror::Error;

use super::{adaptive_simpson, BetaMode, ModelError, Nonlinearity};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Abs,
    Sin,
    Cos,
    Exp,
    Ln,
    Arctan,
    Sqrt,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Self::Abs,
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "exp" => Self::Exp,
            "ln" => Self::Ln,
            "arctan" => Self::Arctan,
            "sqrt" => Self::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Self::Abs => v.abs(),
            Self::Sin => v.sin(),
            Self::Cos => v.cos(),
            Self::Exp => v.exp(),
            Self::Ln => v.ln(),
            Self::Arctan => v.atan(),
            Self::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Parsed expression tree. Variable 0 is `t`, 1..=3 are `x, y, z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(Box<Expr>, OpTag, Box<Expr>),
    Call(FuncTag, Box<Expr>),
}

/// Opaque operator tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpTag(Op);

/// Opaque function tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuncTag(Func);

impl Expr {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Self::Num(v) => *v,
            Self::Var(0) => t,
            Self::Var(k) => x.get(k - 1).copied().unwrap_or(f64::NAN),
            Self::Neg(e) => -e.eval(x, t),
            Self::Bin(a, OpTag(op), b) => {
                let (a, b) = (a.eval(x, t), b.eval(x, t));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Pow => a.powf(b),
                }
            }
            Self::Call(FuncTag(f), e) => f.apply(e.eval(x, t)),
        }
    }

    /// Largest spatial coordinate referenced (0 when none).
    pub fn spatial_rank(&self) -> usize {
        match self {
            Self::Num(_) => 0,
            Self::Var(k) => *k,
            Self::Neg(e) | Self::Call(_, e) => e.spatial_rank(),
            Self::Bin(a, _, b) => a.spatial_rank().max(b.spatial_rank()),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some('+') => Op::Add,
                Some('-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(Box::new(lhs), OpTag(op), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some('*') => Op::Mul,
                Some('/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(Box::new(lhs), OpTag(op), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(Box::new(base), OpTag(Op::Pow), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let start = match self.peek() {
            None => return self.err(self.pos, "unexpected end of input"),
            Some(_) => self.pos,
        };
        let rest = &self.src[start..];
        let c = rest.chars().next().unwrap();
        if c == '(' {
            self.pos += 1;
            let inner = self.expr()?;
            if !self.eat(')') {
                return self.err(self.pos, "expected ')'");
            }
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == '.' {
            let mut end = 0;
            let bytes = rest.as_bytes();
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &rest[..end];
            return match text.parse::<f64>() {
                Ok(v) => {
                    self.pos += end;
                    Ok(Expr::Num(v))
                }
                Err(_) => self.err(start, format!("malformed number '{text}'")),
            };
        }
        if c.is_ascii_alphabetic() {
            let end = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            let name = &rest[..end];
            self.pos += end;
            let var = match name {
                "t" => Some(0),
                "x" => Some(1),
                "y" => Some(2),
                "z" => Some(3),
                _ => None,
            };
            if let Some(k) = var {
                return Ok(Expr::Var(k));
            }
            if name == "pi" {
                return Ok(Expr::Num(std::f64::consts::PI));
            }
            let Some(func) = Func::lookup(name) else {
                return self.err(start, format!("unknown identifier '{name}'"));
            };
            if !self.eat('(') {
                return self.err(self.pos, format!("expected '(' after '{name}'"));
            }
            let arg = self.expr()?;
            if !self.eat(')') {
                return self.err(self.pos, "expected ')'");
            }
            return Ok(Expr::Call(FuncTag(func), Box::new(arg)));
        }
        self.err(start, format!("unexpected character '{c}'"))
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err(p.pos, "unexpected trailing input");
    }
    Ok(e)
}

/// Nonlinearity given by expressions. Without an explicit `F` the primitive
/// comes from adaptive quadrature of `f`.
#[derive(Clone)]
pub struct ExprModel {
    source: String,
    f: Expr,
    primitive: Option<Expr>,
    alpha: Option<f64>,
    eta: Option<f64>,
    odd: bool,
}

impl fmt::Debug for ExprModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExprModel").field("f", &self.source).finish()
    }
}

const ALPHA_PROBE: f64 = 1e-8;
const ETA_PROBE: f64 = 1e8;

impl ExprModel {
    pub fn parse(
        f: &str,
        primitive: Option<&str>,
        alpha: Option<f64>,
        eta: Option<f64>,
    ) -> Result<Self, ModelError> {
        let fe = parse_expr(f)?;
        let pe = primitive.map(parse_expr).transpose()?;
        let probes = [0.0, 0.37, -0.61, 1.3];
        let odd = probes.iter().all(|&c| {
            let x = [c, -c, 0.5 * c];
            [1e-3, 0.4, 1.0, 7.0, 1e3].iter().all(|&t| {
                let (p, m) = (fe.eval(&x, t), fe.eval(&x, -t));
                (p + m).abs() <= 1e-12 * p.abs().max(m.abs())
            })
        });
        Ok(Self {
            source: f.to_string(),
            f: fe,
            primitive: pe,
            alpha,
            eta,
            odd,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of spatial coordinates the expressions reference.
    pub fn spatial_rank(&self) -> usize {
        let p = self.primitive.as_ref().map_or(0, Expr::spatial_rank);
        self.f.spatial_rank().max(p)
    }

    /// `f(x, t)`, reporting a domain error at the offending point.
    pub fn try_f(&self, x: &[f64], t: f64) -> Result<f64, ModelError> {
        let v = self.f.eval(x, t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::Evaluation(format!(
                "f is not finite at x = {x:?}, t = {t}"
            )))
        }
    }
}

impl Nonlinearity for ExprModel {
    fn name(&self) -> String {
        format!("expr({})", self.source)
    }

    fn f(&self, x: &[f64], t: f64) -> f64 {
        self.f.eval(x, t)
    }

    fn primitive(&self, x: &[f64], t: f64) -> f64 {
        if let Some(p) = &self.primitive {
            return p.eval(x, t) - p.eval(x, 0.0);
        }
        let g = |s: f64| self.f.eval(x, s);
        let crude = 0.5 * t * g(t);
        let tol = 1e-10 * crude.abs().max(1e-300);
        adaptive_simpson(&g, 0.0, t, tol)
    }

    fn alpha(&self, x: &[f64]) -> f64 {
        self.alpha.unwrap_or_else(|| {
            0.5 * (self.f.eval(x, ALPHA_PROBE) - self.f.eval(x, -ALPHA_PROBE)) / ALPHA_PROBE
        })
    }

    fn eta(&self, x: &[f64]) -> f64 {
        self.eta.unwrap_or_else(|| {
            0.5 * (self.f.eval(x, ETA_PROBE) - self.f.eval(x, -ETA_PROBE)) / ETA_PROBE
        })
    }

    fn is_odd(&self) -> bool {
        self.odd
    }

    fn is_autonomous(&self) -> bool {
        self.spatial_rank() == 0
    }

    fn beta_mode(&self) -> BetaMode {
        BetaMode::NumericLimit
    }
}
