//! Lagrangian expressions: parsing, evaluation and exact symbolic differentiation.
//!
//! The grammar is ordinary infix arithmetic:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          exponent must be constant
//! primary := number | ident | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt | abs
//! ```
//!
//! Identifiers are `t`, `x<i>`, `y<i>`, `dx<i>` and `dy<i>` with 1-based
//! indices bounded by the declared dimension. Trajectory segments are
//! expressions in `t` only.

use std::fmt;

use thiserror::Error;

/// An admitted symbol. Component indices are stored 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    X(usize),
    Y(usize),
    Dx(usize),
    Dy(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Y(i) => write!(f, "y{}", i + 1),
            Var::Dx(i) => write!(f, "dx{}", i + 1),
            Var::Dy(i) => write!(f, "dy{}", i + 1),
        }
    }
}

/// Which identifiers a parse admits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbols {
    /// `t` plus the four argument blocks of dimension `n`.
    Lagrangian { dim: usize },
    /// `t` only (trajectory segments).
    Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Expression tree. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        pos: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("index {index} of `{name}` at position {pos} is out of range for dimension {dim}")]
    IndexOutOfRange {
        name: String,
        index: usize,
        dim: usize,
        pos: usize,
    },
    #[error("exponent at position {pos} must be a constant")]
    NonConstantExponent { pos: usize },
    #[error("variable `{var}` is not admitted here")]
    InvalidVariable { var: Var },
    #[error("`{0}` is not continuously differentiable; differentiation rejected")]
    NonDifferentiable(String),
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// Evaluation failure carrying the offending subexpression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: &'static str },
    #[error("variable `{0}` is not bound")]
    Unbound(Var),
}

/// A full assignment of the admitted variables.
#[derive(Clone, Copy, Debug)]
pub struct Point<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub dx: &'a [f64],
    pub dy: &'a [f64],
}

impl<'a> Point<'a> {
    pub fn time(t: f64) -> Point<'static> {
        Point {
            t,
            x: &[],
            y: &[],
            dx: &[],
            dy: &[],
        }
    }

    fn get(&self, v: Var) -> Result<f64, EvalError> {
        let slot = match v {
            Var::T => return Ok(self.t),
            Var::X(i) => self.x.get(i),
            Var::Y(i) => self.y.get(i),
            Var::Dx(i) => self.dx.get(i),
            Var::Dy(i) => self.dy.get(i),
        };
        slot.copied().ok_or(EvalError::Unbound(v))
    }
}

fn domain(e: &Expr, reason: &'static str) -> EvalError {
    EvalError::Domain {
        expr: e.to_string(),
        reason,
    }
}

// float guards read more plainly than float literal patterns here
#[allow(clippy::redundant_guards)]
impl Expr {
    pub fn parse(source: &str, symbols: Symbols) -> Result<Expr, ExprError> {
        if let Symbols::Lagrangian { dim: 0 } = symbols {
            return Err(ExprError::ZeroDimension);
        }
        let tokens = tokenize(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            symbols,
        };
        let e = p.expr()?;
        match p.peek() {
            Tok::End => Ok(e),
            other => Err(ExprError::Syntax {
                pos: p.here(),
                expected: vec!["operator".into(), "end of input".into()],
                found: other.describe(),
            }),
        }
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            (Some(x), _) if x == 0.0 => Expr::Const(0.0),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, c: f64) -> Expr {
        if c == 0.0 {
            return Expr::Const(1.0);
        }
        if c == 1.0 {
            return a;
        }
        if let Some(x) = a.as_const() {
            let v = x.powf(c);
            if v.is_finite() {
                return Expr::Const(v);
            }
        }
        Expr::Pow(Box::new(a), c)
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        if let Some(x) = a.as_const() {
            let v = apply(f, x);
            if v.is_finite() && f != Func::Log && f != Func::Sqrt {
                return Expr::Const(v);
            }
        }
        Expr::Call(f, Box::new(a))
    }

    /// Evaluates the expression. Identical inputs give bit-identical outputs.
    pub fn eval(&self, p: &Point<'_>) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(v) => p.get(*v),
            Expr::Neg(a) => Ok(-a.eval(p)?),
            Expr::Add(a, b) => Ok(a.eval(p)? + b.eval(p)?),
            Expr::Sub(a, b) => Ok(a.eval(p)? - b.eval(p)?),
            Expr::Mul(a, b) => Ok(a.eval(p)? * b.eval(p)?),
            Expr::Div(a, b) => {
                let num = a.eval(p)?;
                let den = b.eval(p)?;
                if den == 0.0 {
                    return Err(domain(self, "division by zero"));
                }
                Ok(num / den)
            }
            Expr::Pow(a, c) => {
                let base = a.eval(p)?;
                let is_int = c.fract() == 0.0 && c.abs() <= i32::MAX as f64;
                if is_int {
                    if base == 0.0 && *c < 0.0 {
                        return Err(domain(self, "division by zero"));
                    }
                    Ok(base.powi(*c as i32))
                } else {
                    if base < 0.0 {
                        return Err(domain(self, "fractional power of a negative number"));
                    }
                    if base == 0.0 && *c < 0.0 {
                        return Err(domain(self, "division by zero"));
                    }
                    Ok(base.powf(*c))
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(p)?;
                match f {
                    Func::Log if v <= 0.0 => Err(domain(self, "logarithm of a non-positive number")),
                    Func::Sqrt if v < 0.0 => Err(domain(self, "square root of a negative number")),
                    _ => Ok(apply(*f, v)),
                }
            }
        }
    }

    /// Exact derivative with respect to `var`, folded through the 0/1 identities.
    pub fn differentiate(&self, var: Var) -> Result<Expr, ExprError> {
        Ok(match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.differentiate(var)?),
            Expr::Add(a, b) => Expr::add(a.differentiate(var)?, b.differentiate(var)?),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(var)?, b.differentiate(var)?),
            Expr::Mul(a, b) => {
                let da = a.differentiate(var)?;
                let db = b.differentiate(var)?;
                Expr::add(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db))
            }
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let da = a.differentiate(var)?;
                let db = b.differentiate(var)?;
                if db.is_zero() {
                    Expr::div(da, (**b).clone())
                } else {
                    Expr::div(
                        Expr::sub(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db)),
                        Expr::pow((**b).clone(), 2.0),
                    )
                }
            }
            Expr::Pow(a, c) => {
                let da = a.differentiate(var)?;
                if da.is_zero() {
                    Expr::Const(0.0)
                } else {
                    Expr::mul(Expr::mul(Expr::Const(*c), Expr::pow((**a).clone(), c - 1.0)), da)
                }
            }
            Expr::Call(f, a) => {
                let da = a.differentiate(var)?;
                if *f == Func::Abs {
                    return Err(ExprError::NonDifferentiable(self.to_string()));
                }
                if da.is_zero() {
                    return Ok(Expr::Const(0.0));
                }
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, inner),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, inner)),
                    Func::Exp => Expr::call(Func::Exp, inner),
                    Func::Log => Expr::div(Expr::Const(1.0), inner),
                    Func::Sqrt => Expr::div(
                        Expr::Const(1.0),
                        Expr::mul(Expr::Const(2.0), Expr::call(Func::Sqrt, inner)),
                    ),
                    Func::Abs => unreachable!(),
                };
                Expr::mul(outer, da)
            }
        })
    }

    /// True if `var` occurs anywhere in the tree.
    pub fn mentions(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.mentions(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.mentions(var) || b.mentions(var),
        }
    }
}

fn apply(f: Func, v: f64) -> f64 {
    match f {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Exp => v.exp(),
        Func::Log => v.ln(),
        Func::Sqrt => v.sqrt(),
        Func::Abs => v.abs(),
    }
}

fn fmt_const(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        write!(f, "(-{})", -c)
    } else {
        write!(f, "{}", c)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Pow(a, c) => {
                write!(f, "({a}^")?;
                fmt_const(*c, f)?;
                write!(f, ")")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Tokenizer and parser

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
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
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ExprError::Syntax {
                        pos: start,
                        expected: vec!["number".into(), "identifier".into(), "operator".into()],
                        found: format!("`{c}`"),
                    })
                }
            };
            out.push((tok, start));
            i += 1;
        }
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    symbols: Symbols,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn here(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let pos = self.here();
            let exponent = self.unary()?;
            let c = const_value(&exponent).ok_or(ExprError::NonConstantExponent { pos })?;
            return Ok(Expr::Pow(Box::new(base), c));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    let (next, npos) = self.bump();
                    if next != Tok::LParen {
                        return Err(ExprError::Syntax {
                            pos: npos,
                            expected: vec!["`(`".into()],
                            found: next.describe(),
                        });
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                Ok(Expr::Var(self.resolve(&name, pos)?))
            }
            other => Err(ExprError::Syntax {
                pos,
                expected: vec!["number".into(), "identifier".into(), "`(`".into()],
                found: other.describe(),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        let (tok, pos) = self.bump();
        if tok == Tok::RParen {
            Ok(())
        } else {
            Err(ExprError::Syntax {
                pos,
                expected: vec!["`)`".into(), "operator".into()],
                found: tok.describe(),
            })
        }
    }

    fn resolve(&self, name: &str, pos: usize) -> Result<Var, ExprError> {
        if name == "t" {
            return Ok(Var::T);
        }
        let dim = match self.symbols {
            Symbols::Lagrangian { dim } => dim,
            Symbols::Time => return Err(ExprError::UnknownIdentifier { name: name.into(), pos }),
        };
        let (prefix, digits) = ["dx", "dy", "x", "y"]
            .iter()
            .find_map(|p| name.strip_prefix(p).map(|rest| (*p, rest)))
            .ok_or_else(|| ExprError::UnknownIdentifier { name: name.into(), pos })?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return Err(ExprError::UnknownIdentifier { name: name.into(), pos });
        }
        let index: usize = digits
            .parse()
            .map_err(|_| ExprError::UnknownIdentifier { name: name.into(), pos })?;
        if index == 0 || index > dim {
            return Err(ExprError::IndexOutOfRange {
                name: name.into(),
                index,
                dim,
                pos,
            });
        }
        let i = index - 1;
        Ok(match prefix {
            "x" => Var::X(i),
            "y" => Var::Y(i),
            "dx" => Var::Dx(i),
            _ => Var::Dy(i),
        })
    }
}

fn const_value(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        Expr::Neg(a) => const_value(a).map(|v| -v),
        Expr::Pow(a, c) => const_value(a).map(|v| v.powf(*c)),
        _ => None,
    }
}

// ---------------------------------------------------------------------------

/// A parsed Lagrangian `L(t, x, y, dx, dy)` with its first partials.
///
/// Partials are stored in block order `x1..xn, y1..yn, dx1..dxn, dy1..dyn`.
#[derive(Clone, Debug)]
pub struct LagrangianExpr {
    dim: usize,
    source: String,
    body: Expr,
    partials: Vec<Expr>,
}

/// One of the four argument blocks of `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    X,
    Y,
    Dx,
    Dy,
}

impl Block {
    pub fn var(self, i: usize) -> Var {
        match self {
            Block::X => Var::X(i),
            Block::Y => Var::Y(i),
            Block::Dx => Var::Dx(i),
            Block::Dy => Var::Dy(i),
        }
    }

    fn offset(self) -> usize {
        match self {
            Block::X => 0,
            Block::Y => 1,
            Block::Dx => 2,
            Block::Dy => 3,
        }
    }
}

pub fn parse_lagrangian(source: &str, dim: usize) -> Result<LagrangianExpr, ExprError> {
    let body = Expr::parse(source, Symbols::Lagrangian { dim })?;
    LagrangianExpr::from_body(body, dim, source.to_string())
}

impl LagrangianExpr {
    pub fn from_body(body: Expr, dim: usize, source: String) -> Result<Self, ExprError> {
        if dim == 0 {
            return Err(ExprError::ZeroDimension);
        }
        let mut partials = Vec::with_capacity(4 * dim);
        for block in [Block::X, Block::Y, Block::Dx, Block::Dy] {
            for i in 0..dim {
                partials.push(body.differentiate(block.var(i))?);
            }
        }
        Ok(LagrangianExpr {
            dim,
            source,
            body,
            partials,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn partial(&self, block: Block, i: usize) -> &Expr {
        &self.partials[block.offset() * self.dim + i]
    }

    pub fn partials(&self) -> &[Expr] {
        &self.partials
    }

    /// Replaces the partials without re-deriving them. Used to inject faults
    /// when testing that code paths do not depend on the partials.
    #[doc(hidden)]
    pub fn with_partials_unchecked(mut self, partials: Vec<Expr>) -> Self {
        assert_eq!(partials.len(), 4 * self.dim);
        self.partials = partials;
        self
    }

    pub fn eval(&self, p: &Point<'_>) -> Result<f64, EvalError> {
        self.body.eval(p)
    }

    /// Gradient of `L` with respect to one argument block.
    pub fn gradient(&self, block: Block, p: &Point<'_>) -> Result<Vec<f64>, EvalError> {
        (0..self.dim).map(|i| self.partial(block, i).eval(p)).collect()
    }
}
