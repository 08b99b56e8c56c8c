//! Coordinate expressions: parsing, evaluation over any [`Scalar`], and
//! structural queries.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          right-associative, exponent constant
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! func   := exp | log | sin | cos | sqrt
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops;

use thiserror::Error;

use crate::autodiff::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Exp, Func::Log, Func::Sin, Func::Cos, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// Expression tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Constant exponent; integral values evaluate with `powi`.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {position}: {message}{}", expected.as_ref().map(|e| format!(" (expected {e})")).unwrap_or_default())]
pub struct ParseError {
    pub position: usize,
    pub message: String,
    pub expected: Option<String>,
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn pow(self, e: f64) -> Expr {
        Expr::Pow(Box::new(self), e)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Evaluates with variables bound by name.
    pub fn eval<S: Scalar>(&self, env: &HashMap<String, S>) -> Result<S> {
        self.eval_with(&|name: &str| env.get(name).cloned())
    }

    /// Evaluates with an arbitrary variable lookup.
    pub fn eval_with<S, F>(&self, lookup: &F) -> Result<S>
    where
        S: Scalar,
        F: Fn(&str) -> Option<S>,
    {
        Ok(match self {
            Expr::Const(c) => S::from_f64(*c),
            Expr::Var(name) => {
                lookup(name).ok_or_else(|| Error::UnboundVariable(name.clone()))?
            }
            Expr::Neg(a) => -a.eval_with(lookup)?,
            Expr::Add(a, b) => a.eval_with(lookup)? + b.eval_with(lookup)?,
            Expr::Sub(a, b) => a.eval_with(lookup)? - b.eval_with(lookup)?,
            Expr::Mul(a, b) => a.eval_with(lookup)? * b.eval_with(lookup)?,
            Expr::Div(a, b) => {
                let num = a.eval_with(lookup)?;
                let den = b.eval_with(lookup)?;
                if den.primal() == 0.0 {
                    return Err(self.domain_error("division by zero"));
                }
                num / den
            }
            Expr::Pow(a, e) => {
                let base = a.eval_with::<S, F>(lookup)?;
                let b = base.primal();
                if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                    if b == 0.0 && *e < 0.0 {
                        return Err(self.domain_error("zero raised to a negative power"));
                    }
                    base.powi(*e as i32)
                } else {
                    if b <= 0.0 {
                        return Err(
                            self.domain_error("non-positive base with non-integer exponent")
                        );
                    }
                    base.powf(*e)
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval_with::<S, F>(lookup)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Log => {
                        if x.primal() <= 0.0 {
                            return Err(self.domain_error("log of a non-positive value"));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x.primal() <= 0.0 {
                            return Err(self.domain_error("sqrt of a non-positive value"));
                        }
                        x.sqrt()
                    }
                }
            }
        })
    }

    fn domain_error(&self, reason: &str) -> Error {
        Error::Domain {
            subtree: self.to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replaces variables by expressions. Unmapped variables are kept.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        let rec = |e: &Expr| Box::new(e.substitute(map));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(rec(a)),
            Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
            Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
            Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
            Expr::Div(a, b) => Expr::Div(rec(a), rec(b)),
            Expr::Pow(a, e) => Expr::Pow(rec(a), *e),
            Expr::Call(f, a) => Expr::Call(*f, rec(a)),
        }
    }

    /// Shorthand for substituting a single numeric value.
    pub fn substitute_value(&self, name: &str, value: f64) -> Expr {
        let mut map = HashMap::new();
        map.insert(name.to_string(), Expr::Const(value));
        self.substitute(&map)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse(s)
    }
}

fn fmt_number(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(-{:?})", -v)
    } else {
        write!(f, "{v:?}")
    }
}

fn fmt_child(child: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if child.precedence() < min {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_number(*c, f),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                fmt_child(a, 3, f)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let (op, level) = match self {
                    Expr::Add(..) => (" + ", 1),
                    Expr::Sub(..) => (" - ", 1),
                    Expr::Mul(..) => ("*", 2),
                    _ => ("/", 2),
                };
                fmt_child(a, level, f)?;
                write!(f, "{op}")?;
                fmt_child(b, level + 1, f)
            }
            Expr::Pow(a, e) => {
                fmt_child(a, 5, f)?;
                write!(f, "^")?;
                fmt_number(*e, f)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

macro_rules! expr_binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> std::result::Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v = lit.parse::<f64>().map_err(|_| ParseError {
                position: start,
                message: format!("malformed number `{lit}`"),
                expected: Some("a decimal literal".into()),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or(c);
                    return Err(ParseError {
                        position: start,
                        message: format!("unexpected character `{ch}`"),
                        expected: Some("an operator, number, identifier, or parenthesis".into()),
                    });
                }
            };
            i += 1;
            out.push((start, tok));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    text: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        match self.toks.get(self.pos) {
            Some((o, _)) => *o,
            None => self.text.len().saturating_sub(1),
        }
    }

    fn error(&self, message: impl Into<String>, expected: &str) -> ParseError {
        ParseError {
            position: self.offset(),
            message: message.into(),
            expected: Some(expected.to_string()),
        }
    }

    fn expr(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { lhs + rhs } else { lhs - rhs };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> std::result::Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { lhs * rhs } else { lhs / rhs };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> std::result::Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> std::result::Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let at = self.offset();
            let exponent = self.unary()?;
            if !exponent.free_variables().is_empty() {
                return Err(ParseError {
                    position: at,
                    message: "exponent must be a constant".into(),
                    expected: Some("an integer or rational constant".into()),
                });
            }
            let e: f64 = exponent
                .eval_with(&|_: &str| None::<f64>)
                .map_err(|err| ParseError {
                    position: at,
                    message: format!("cannot evaluate exponent: {err}"),
                    expected: Some("an integer or rational constant".into()),
                })?;
            if !e.is_finite() {
                return Err(ParseError {
                    position: at,
                    message: "exponent is not finite".into(),
                    expected: Some("an integer or rational constant".into()),
                });
            }
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> std::result::Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                let at = self.offset();
                self.pos += 1;
                if let Some(Tok::LParen) = self.peek() {
                    let func = Func::from_name(&name).ok_or_else(|| ParseError {
                        position: at,
                        message: format!("unknown function `{name}`"),
                        expected: Some("one of exp, log, sin, cos, sqrt".into()),
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::call(func, arg))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(tok) => Err(self.error(
                format!("unexpected token {tok:?}"),
                "a number, identifier, or `(`",
            )),
            None => Err(self.error("unexpected end of input", "a number, identifier, or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> std::result::Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error("unbalanced parenthesis", "`)`")),
        }
    }
}

/// Parses infix expression text.
pub fn parse(text: &str) -> std::result::Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, text };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.error("trailing input", "an operator or end of input"));
    }
    Ok(e)
}
