//! Expression trees over the variable alphabet `t`, `z`, `x<k>`, `x<k>'`, ...
//!
//! Lagrangians and symmetry generators are written as plain text, e.g.
//! `x1'^2/2 - x1^2/2 - z`, where each prime raises the derivative order.
//! Trees are immutable; [`Expr::diff`] returns the exact partial derivative
//! with respect to one variable, treating every `x_k^(j)` as independent.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | ident | '(' expr ')' | func '(' expr ')'
//! func   := sin | cos | exp | log | sqrt
//! ident  := 't' | 'z' | 'x' digits '\''*
//! ```
//!
//! The extended alphabet used by finite transformation families also admits
//! the group parameter `s`.

use std::fmt;

use crate::error::{Error, Result};

/// A variable of the Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Time,
    Z,
    /// Group parameter `s` of a one-parameter family.
    Param,
    /// `x_index^(order)`, with `index` counted from 1.
    State { index: usize, order: usize },
}

impl VarRef {
    pub fn x(index: usize, order: usize) -> Self {
        VarRef::State { index, order }
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarRef::Time => f.write_str("t"),
            VarRef::Z => f.write_str("z"),
            VarRef::Param => f.write_str("s"),
            VarRef::State { index, order } => {
                write!(f, "x{index}")?;
                for _ in 0..order {
                    f.write_str("'")?;
                }
                Ok(())
            }
        }
    }
}

/// Which variables an expression may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabet {
    pub order: usize,
    pub dim: usize,
    pub allow_param: bool,
}

impl Alphabet {
    pub fn new(order: usize, dim: usize) -> Self {
        Alphabet { order, dim, allow_param: false }
    }

    pub fn with_param(order: usize, dim: usize) -> Self {
        Alphabet { order, dim, allow_param: true }
    }

    pub fn check(&self, v: VarRef) -> Result<()> {
        match v {
            VarRef::Time | VarRef::Z => Ok(()),
            VarRef::Param if self.allow_param => Ok(()),
            VarRef::Param => Err(Error::VariableOutOfBounds("parameter `s` not allowed here".into())),
            VarRef::State { index, order } => {
                if index == 0 || index > self.dim {
                    Err(Error::IndexExceeded { index, max: self.dim })
                } else if order > self.order {
                    Err(Error::OrderExceeded { index, order, max: self.order })
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(VarRef),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

/// Values of every variable at one instant.
///
/// State values are packed in derivative-order blocks of size `dim`:
/// `x[j * dim + (k - 1)] = x_k^(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub t: f64,
    pub z: f64,
    pub s: f64,
    order: usize,
    dim: usize,
    x: Vec<f64>,
}

impl EvalPoint {
    pub fn zeros(order: usize, dim: usize) -> Self {
        EvalPoint { t: 0.0, z: 0.0, s: 0.0, order, dim, x: vec![0.0; (order + 1) * dim] }
    }

    /// Builds a point from `rows[k][j] = x_{k+1}^(j)`.
    pub fn new(t: f64, rows: &[Vec<f64>], z: f64) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch("evaluation point needs at least one component".into()));
        }
        let width = rows[0].len();
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::DimensionMismatch("ragged derivative rows".into()));
        }
        let mut p = EvalPoint::zeros(width - 1, dim);
        p.t = t;
        p.z = z;
        for (k, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                p.set_x(k + 1, j, v);
            }
        }
        Ok(p)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, index: usize, order: usize) -> f64 {
        self.x[order * self.dim + index - 1]
    }

    pub fn set_x(&mut self, index: usize, order: usize, value: f64) {
        self.x[order * self.dim + index - 1] = value;
    }

    /// Packed state values, derivative-order major.
    pub fn packed(&self) -> &[f64] {
        &self.x
    }

    pub fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn get(&self, v: VarRef) -> Result<f64> {
        match v {
            VarRef::Time => Ok(self.t),
            VarRef::Z => Ok(self.z),
            VarRef::Param => Ok(self.s),
            VarRef::State { index, order } => {
                if index == 0 || index > self.dim || order > self.order {
                    Err(Error::DimensionMismatch(format!("{v} not present at an order-{} dim-{} point", self.order, self.dim)))
                } else {
                    Ok(self.x(index, order))
                }
            }
        }
    }
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(v: VarRef) -> Self {
        Expr::Var(v)
    }

    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    pub fn parse(source: &str, order: usize, dim: usize) -> Result<Self> {
        parse(source, order, dim)
    }

    // Smart constructors applying the identity and annihilator rules.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg(b),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            _ if a.is_zero() || b.is_zero() => Expr::zero(),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            Expr::zero()
        } else if b.is_one() {
            a
        } else {
            Expr::Div(Box::new(a), Box::new(b))
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            a
        } else if b.is_zero() {
            Expr::Const(1.0)
        } else {
            Expr::Pow(Box::new(a), Box::new(b))
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn func(f: Func, a: Expr) -> Expr {
        Expr::Func(f, Box::new(a))
    }

    /// True if `v` occurs anywhere in the tree.
    pub fn contains(&self, v: VarRef) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Func(_, a) => a.contains(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.contains(v) || b.contains(v)
            }
        }
    }

    /// Calls `f` on every variable occurrence.
    pub fn visit_vars(&self, f: &mut impl FnMut(VarRef)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(w) => f(*w),
            Expr::Neg(a) | Expr::Func(_, a) => a.visit_vars(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Checks every variable against `alphabet`.
    pub fn check_bounds(&self, alphabet: &Alphabet) -> Result<()> {
        let mut err = None;
        self.visit_vars(&mut |v| {
            if err.is_none() {
                err = alphabet.check(v).err();
            }
        });
        err.map_or(Ok(()), Err)
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => p.get(*v)?,
            Expr::Neg(a) => -a.eval(p)?,
            Expr::Add(a, b) => a.eval(p)? + b.eval(p)?,
            Expr::Sub(a, b) => a.eval(p)? - b.eval(p)?,
            Expr::Mul(a, b) => a.eval(p)? * b.eval(p)?,
            Expr::Div(a, b) => {
                let den = b.eval(p)?;
                if den == 0.0 {
                    return Err(Error::Domain(format!("division by zero in {self}")));
                }
                a.eval(p)? / den
            }
            Expr::Pow(a, b) => power(a.eval(p)?, b.eval(p)?)?,
            Expr::Func(f, a) => {
                let x = a.eval(p)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log if x <= 0.0 => return Err(Error::Domain(format!("log of non-positive value {x}"))),
                    Func::Log => x.ln(),
                    Func::Sqrt if x < 0.0 => return Err(Error::Domain(format!("sqrt of negative value {x}"))),
                    Func::Sqrt => x.sqrt(),
                }
            }
        })
    }

    /// Exact partial derivative with respect to `v`.
    pub fn diff(&self, v: VarRef) -> Expr {
        if !self.contains(v) {
            return Expr::zero();
        }
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(w) => Expr::Const(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.diff(v)),
            Expr::Add(a, b) => Expr::add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => Expr::sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(v), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(v)),
            ),
            Expr::Div(a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                if db.is_zero() {
                    Expr::div(da, (**b).clone())
                } else {
                    Expr::div(
                        Expr::sub(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db)),
                        Expr::pow((**b).clone(), Expr::Const(2.0)),
                    )
                }
            }
            Expr::Pow(a, b) => {
                let (a, b) = (&**a, &**b);
                if !b.contains(v) {
                    // d(a^c) = c a^(c-1) da
                    let lowered = Expr::pow(a.clone(), Expr::sub(b.clone(), Expr::Const(1.0)));
                    Expr::mul(Expr::mul(b.clone(), lowered), a.diff(v))
                } else if !a.contains(v) {
                    Expr::mul(
                        Expr::mul(self.clone(), Expr::func(Func::Log, a.clone())),
                        b.diff(v),
                    )
                } else {
                    let inner = Expr::add(
                        Expr::mul(b.diff(v), Expr::func(Func::Log, a.clone())),
                        Expr::div(Expr::mul(b.clone(), a.diff(v)), a.clone()),
                    );
                    Expr::mul(self.clone(), inner)
                }
            }
            Expr::Func(f, a) => {
                let da = a.diff(v);
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::func(Func::Cos, a),
                    Func::Cos => Expr::neg(Expr::func(Func::Sin, a)),
                    Func::Exp => Expr::func(Func::Exp, a),
                    Func::Log => return Expr::div(da, a),
                    Func::Sqrt => {
                        return Expr::div(da, Expr::mul(Expr::Const(2.0), Expr::func(Func::Sqrt, a)))
                    }
                };
                Expr::mul(outer, da)
            }
        }
    }
}

fn power(base: f64, exponent: f64) -> Result<f64> {
    if base == 0.0 && exponent < 0.0 {
        return Err(Error::Domain("zero raised to a negative power".into()));
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        return Ok(base.powi(exponent as i32));
    }
    if base < 0.0 {
        return Err(Error::Domain(format!("negative base {base} with non-integer exponent {exponent}")));
    }
    Ok(base.powf(exponent))
}

/// Canonical printer: fully parenthesised, round-trips through [`parse`].
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-({a}))"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

pub fn parse(source: &str, order: usize, dim: usize) -> Result<Expr> {
    parse_with(source, &Alphabet::new(order, dim))
}

pub fn parse_with(source: &str, alphabet: &Alphabet) -> Result<Expr> {
    if alphabet.order == 0 || alphabet.dim == 0 {
        return Err(Error::DimensionMismatch("order and dimension must be at least 1".into()));
    }
    let tokens = lex(source)?;
    let mut parser = Parser { tokens, pos: 0, alphabet, end: source.chars().count() + 1 };
    let e = parser.expr()?;
    match parser.peek() {
        None => Ok(e),
        Some(tok) => Err(Error::Syntax { column: tok.column, message: format!("unexpected {}", tok.kind) }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String, usize),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Number(x) => write!(f, "number {x}"),
            TokenKind::Ident(name, primes) => write!(f, "`{name}{}`", "'".repeat(*primes)),
            TokenKind::Op(c) => write!(f, "`{c}`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    /// 1-based character column.
    column: usize,
}

fn lex(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| Error::Syntax { column, message: format!("malformed number `{text}`") })?;
            if !value.is_finite() {
                return Err(Error::Syntax { column, message: format!("number `{text}` is not finite") });
            }
            tokens.push(Token { kind: TokenKind::Number(value), column });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            let mut primes = 0;
            while i < chars.len() && chars[i] == '\'' {
                primes += 1;
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Ident(name, primes), column });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            _ => return Err(Error::Syntax { column, message: format!("unexpected character `{c}`") }),
        };
        tokens.push(Token { kind, column });
        i += 1;
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    alphabet: &'a Alphabet,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token { kind: TokenKind::Op(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn eof_error(&self, expected: &str) -> Error {
        Error::Syntax { column: self.end, message: format!("unexpected end of input, expected {expected}") }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            // A minus directly on a bare literal is a negative constant.
            let literal = matches!(self.peek(), Some(Token { kind: TokenKind::Number(_), .. }));
            let inner = self.factor()?;
            return Ok(match inner {
                Expr::Const(c) if literal => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        let base = self.base()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        let tok = self.next().ok_or_else(|| self.eof_error("an operand"))?;
        match tok.kind {
            TokenKind::Number(x) => Ok(Expr::Const(x)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokenKind::Ident(name, primes) => self.ident(&name, primes, tok.column),
            other => Err(Error::Syntax { column: tok.column, message: format!("unexpected {other}") }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.next() {
            Some(Token { kind: TokenKind::RParen, .. }) => Ok(()),
            Some(tok) => Err(Error::Syntax { column: tok.column, message: format!("expected `)`, found {}", tok.kind) }),
            None => Err(self.eof_error("`)`")),
        }
    }

    fn ident(&mut self, name: &str, primes: usize, column: usize) -> Result<Expr> {
        if let Some(func) = Func::from_name(name) {
            if primes > 0 {
                return Err(Error::Syntax { column, message: format!("primes are not allowed on `{name}`") });
            }
            match self.next() {
                Some(Token { kind: TokenKind::LParen, .. }) => {}
                Some(tok) => {
                    return Err(Error::Syntax { column: tok.column, message: format!("expected `(` after `{name}`") })
                }
                None => return Err(self.eof_error("`(`")),
            }
            let arg = self.expr()?;
            self.expect_rparen()?;
            return Ok(Expr::Func(func, Box::new(arg)));
        }
        let var = match name {
            "t" => VarRef::Time,
            "z" => VarRef::Z,
            "s" if self.alphabet.allow_param => VarRef::Param,
            _ if name.len() > 1 && name.starts_with('x') && name[1..].bytes().all(|b| b.is_ascii_digit()) => {
                let index: usize = name[1..]
                    .parse()
                    .map_err(|_| Error::Syntax { column, message: format!("component index in `{name}` is too large") })?;
                VarRef::State { index, order: primes }
            }
            _ => return Err(Error::UnknownIdentifier { name: name.to_string(), column }),
        };
        if primes > 0 && !matches!(var, VarRef::State { .. }) {
            return Err(Error::Syntax { column, message: format!("primes are only allowed on state variables, not `{name}`") });
        }
        self.alphabet.check(var)?;
        Ok(Expr::Var(var))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point1(t: f64, x: f64, xd: f64, z: f64) -> EvalPoint {
        EvalPoint::new(t, &[vec![x, xd]], z).unwrap()
    }

    #[test]
    fn parse_and_eval_examples() {
        let e = parse("x1'^2 / 2", 1, 1).unwrap();
        assert_eq!(e.eval(&point1(0.0, 0.0, 3.0, 0.0)).unwrap(), 4.5);

        let e = parse("sin(t) + x1*z", 1, 1).unwrap();
        assert_eq!(e.eval(&point1(0.0, 2.0, 0.0, 3.0)).unwrap(), 6.0);

        let e = parse("x1' * x1'", 1, 1).unwrap();
        assert_eq!(e.eval(&point1(0.0, 0.0, -2.0, 0.0)).unwrap(), 4.0);

        let e = parse("exp(2*t)", 1, 1).unwrap();
        assert_eq!(e.eval(&point1(0.0, 0.0, 0.0, 0.0)).unwrap(), 1.0);

        assert_eq!(Expr::Const(7.0).eval(&point1(1.0, 2.0, 3.0, 4.0)).unwrap(), 7.0);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let p = point1(0.0, 3.0, 0.0, 0.0);
        assert_eq!(parse("-x1^2", 1, 1).unwrap().eval(&p).unwrap(), -9.0);
        assert_eq!(parse("2^3^2", 1, 1).unwrap().eval(&p).unwrap(), 512.0);
        assert_eq!(parse("1 - 2 - 3", 1, 1).unwrap().eval(&p).unwrap(), -4.0);
        assert_eq!(parse("8 / 4 / 2", 1, 1).unwrap().eval(&p).unwrap(), 1.0);
        assert_eq!(parse("x1^-1", 1, 1).unwrap().eval(&p).unwrap(), 1.0 / 3.0);
        assert_eq!(parse("-2", 1, 1).unwrap(), Expr::Const(-2.0));
        assert_eq!(parse("2.5e-1 + .5", 1, 1).unwrap().eval(&p).unwrap(), 0.75);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse("x1''", 1, 1), Err(Error::OrderExceeded { index: 1, order: 2, max: 1 })));
        assert!(matches!(parse("x2", 1, 1), Err(Error::IndexExceeded { index: 2, max: 1 })));
        assert!(matches!(parse("y + 1", 1, 1), Err(Error::UnknownIdentifier { column: 1, .. })));
        assert!(matches!(parse("s", 1, 1), Err(Error::UnknownIdentifier { .. })));
        assert!(parse_with("s * x1", &Alphabet::with_param(1, 1)).is_ok());
        match parse("x1 + * 2", 1, 1) {
            Err(Error::Syntax { column, .. }) => assert_eq!(column, 6),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(parse("(x1 + 2", 1, 1), Err(Error::Syntax { column: 8, .. })));
        assert!(matches!(parse("sin x1", 1, 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse("z'", 1, 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1 $", 1, 1), Err(Error::Syntax { column: 4, .. })));
        assert!(matches!(parse("", 1, 1), Err(Error::Syntax { .. })));
    }

    #[test]
    fn domain_errors() {
        let p = point1(0.0, -1.0, 0.0, 0.0);
        for src in ["log(x1)", "sqrt(x1)", "1 / x1'", "x1^0.5", "log(0)", "x1'^-1"] {
            let e = parse(src, 1, 1).unwrap();
            assert!(matches!(e.eval(&p), Err(Error::Domain(_))), "{src}");
        }
        assert_eq!(parse("x1^3", 1, 1).unwrap().eval(&p).unwrap(), -1.0);
    }

    #[test]
    fn diff_examples() {
        let l = parse("x1'^2/2", 1, 1).unwrap();
        let d = l.diff(VarRef::x(1, 1));
        assert_eq!(d.eval(&point1(0.0, 0.0, 3.0, 0.0)).unwrap(), 3.0);

        let l = parse("x1'^2/2 - x1^2/2 - z", 1, 1).unwrap();
        let dz = l.diff(VarRef::Z);
        for (t, x, xd, z) in [(0.0, 1.0, 2.0, 3.0), (0.7, -4.0, 0.1, 9.0)] {
            assert_eq!(dz.eval(&point1(t, x, xd, z)).unwrap(), -1.0);
        }
        assert_eq!(dz, Expr::Const(-1.0));

        assert!(l.diff(VarRef::Time).is_zero());
        assert!(parse("sin(x1')", 1, 1).unwrap().diff(VarRef::x(1, 0)).is_zero());
    }

    #[test]
    fn simplification_rules() {
        let x = Expr::var(VarRef::x(1, 0));
        assert_eq!(Expr::mul(Expr::zero(), x.clone()), Expr::zero());
        assert_eq!(Expr::mul(Expr::Const(1.0), x.clone()), x);
        assert_eq!(Expr::add(x.clone(), Expr::zero()), x);
        assert_eq!(Expr::sub(Expr::zero(), x.clone()), Expr::Neg(Box::new(x.clone())));
        assert_eq!(Expr::neg(Expr::neg(x.clone())), x);
    }

    #[test]
    fn printer_round_trip_examples() {
        for src in ["x1'^2/2 - x1^2/2 - z", "-(2)", "-2", "sin(t)*exp(-z)/sqrt(x1 + 3)", "x1^x1'", "(-x1)^2"] {
            let e = parse(src, 1, 1).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed, 1, 1).unwrap(), e, "{src} -> {printed}");
        }
    }

    fn arb_var() -> impl Strategy<Value = VarRef> {
        prop_oneof![
            Just(VarRef::Time),
            Just(VarRef::Z),
            (1usize..=2, 0usize..=2).prop_map(|(k, j)| VarRef::x(k, j)),
        ]
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-5.0f64..5.0).prop_map(Expr::Const),
            arb_var().prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                // denominators kept in [1, 3]
                (inner.clone(), inner.clone()).prop_map(|(a, b)| {
                    let den = Expr::Add(Box::new(Expr::Const(2.0)), Box::new(Expr::Func(Func::Cos, Box::new(b))));
                    Expr::Div(Box::new(a), Box::new(den))
                }),
                (inner.clone(), 0u8..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), Box::new(Expr::Const(k as f64)))),
                (inner.clone(), prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp)])
                    .prop_map(|(a, f)| Expr::Func(f, Box::new(a))),
            ]
        })
    }

    fn arb_point() -> impl Strategy<Value = EvalPoint> {
        (-1.0f64..1.0, prop::collection::vec(-1.0f64..1.0, 6), -1.0f64..1.0).prop_map(|(t, x, z)| {
            let rows = vec![x[0..3].to_vec(), x[3..6].to_vec()];
            EvalPoint::new(t, &rows, z).unwrap()
        })
    }

    fn shifted(p: &EvalPoint, v: VarRef, dh: f64) -> EvalPoint {
        let mut q = p.clone();
        match v {
            VarRef::Time => q.t += dh,
            VarRef::Z => q.z += dh,
            VarRef::Param => q.s += dh,
            VarRef::State { index, order } => q.set_x(index, order, p.x(index, order) + dh),
        }
        q
    }

    proptest! {
        #[test]
        fn printed_form_parses_back(e in arb_expr()) {
            let printed = e.to_string();
            prop_assert_eq!(parse(&printed, 2, 2).unwrap(), e);
        }

        #[test]
        fn diff_of_absent_variable_is_zero(e in arb_expr()) {
            let absent = VarRef::x(1, 2);
            let e = e.clone();
            if !e.contains(absent) {
                prop_assert!(e.diff(absent).is_zero());
            }
        }

        #[test]
        fn diff_matches_central_difference(e in arb_expr(), p in arb_point(), v in arb_var()) {
            let d = e.diff(v);
            let exact = match d.eval(&p) { Ok(x) => x, Err(_) => return Ok(()) };
            let fd = |h: f64| -> Option<f64> {
                let fp = e.eval(&shifted(&p, v, h)).ok()?;
                let fm = e.eval(&shifted(&p, v, -h)).ok()?;
                Some((fp - fm) / (2.0 * h))
            };
            let (Some(f4), Some(f5), Some(f6)) = (fd(1e-4), fd(1e-5), fd(1e-6)) else { return Ok(()) };
            let f0 = e.eval(&p).unwrap_or(0.0).abs();
            // skip points where the function is huge or nearly singular
            prop_assume!(exact.abs() < 1e4 && f0 < 1e4);
            let scale = 1.0 + exact.abs() + f0;
            let (e4, e5, e6) = ((f4 - exact).abs(), (f5 - exact).abs(), (f6 - exact).abs());
            prop_assert!(e6 <= 1e-6 * scale, "fd {} vs exact {} for {}", f6, exact, e);
            // observed order over the two coarser steps, unless already at the
            // round-off floor (1e-16 / h scaled)
            let floor = 1e-9 * scale;
            if e4 > floor && e5 > floor {
                let order = (e4 / e5).log10();
                prop_assert!(order >= 1.8, "order {} for {}", order, e);
            }
        }
    }
}
