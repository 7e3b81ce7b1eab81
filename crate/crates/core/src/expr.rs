//! Small differentiable expression language.
//!
//! Grammar: numeric literals, coordinate names, `+ - * / ^`, parentheses and
//! the functions `sin cos exp log sqrt`. Expressions evaluate over any
//! [`Real`] scalar, so derivatives of every order come from nested duals.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::real::{Dual, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply<T: Real>(self, v: T) -> T {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    PowI(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn powi(self, n: i32) -> Expr {
        Expr::PowI(Box::new(self), n)
    }

    pub fn eval<T: Real>(&self, vars: &[T]) -> T {
        match self {
            Expr::Const(c) => T::constant(*c),
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => a.eval(vars).powf(b.eval(vars)),
            Expr::PowI(a, n) => a.eval(vars).powi(*n),
            Expr::Call(f, a) => f.apply(a.eval(vars)),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::PowI(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    pub fn gradient<T: Real>(&self, x: &[T]) -> Vec<T> {
        crate::real::gradient(|v| self.eval(v), x)
    }

    /// Value, gradient and row-major Hessian at `x`.
    pub fn value_gradient_hessian<T: Real>(&self, x: &[T]) -> (T, Vec<T>, Vec<T>) {
        let m = x.len();
        let mut grad = vec![T::zero(); m];
        let mut hess = vec![T::zero(); m * m];
        let mut value = self.eval(x);
        let mut buf: Vec<Dual<Dual<T>>> =
            x.iter().map(|&v| Dual::lift(Dual::lift(v))).collect();
        for i in 0..m {
            buf[i].eps.re = T::one();
            for j in i..m {
                buf[j].re.eps = T::one();
                let r = self.eval(&buf);
                buf[j].re.eps = T::zero();
                hess[i * m + j] = r.eps.eps;
                hess[j * m + i] = r.eps.eps;
                if j == i {
                    grad[i] = r.eps.re;
                    value = r.re.re;
                }
            }
            buf[i].eps.re = T::zero();
        }
        if m == 0 {
            value = self.eval(x);
        }
        (value, grad, hess)
    }

    /// Third partial derivatives `∂_i∂_j∂_k` as a flat `m³` array.
    pub fn third_derivatives(&self, x: &[f64]) -> Vec<f64> {
        let m = x.len();
        let mut out = vec![0.0; m * m * m];
        type D3 = Dual<Dual<Dual<f64>>>;
        let mut buf: Vec<D3> = x.iter().map(|&v| D3::lift(Dual::lift(Dual::lift(v)))).collect();
        for i in 0..m {
            for j in i..m {
                for k in j..m {
                    buf[i].eps.re.re += 1.0;
                    buf[j].re.eps.re += 1.0;
                    buf[k].re.re.eps += 1.0;
                    let r = self.eval(&buf);
                    buf[i].eps.re.re -= 1.0;
                    buf[j].re.eps.re -= 1.0;
                    buf[k].re.re.eps -= 1.0;
                    let d = r.eps.eps.eps;
                    for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        out[(a * m + b) * m + c] = d;
                    }
                }
            }
        }
        out
    }

    /// Symbolic partial derivative with respect to variable `i`, with light
    /// constant folding.
    pub fn diff(&self, i: usize) -> Expr {
        use Expr::*;
        match self {
            Const(_) => Const(0.0),
            Var(j) => Const(if *j == i { 1.0 } else { 0.0 }),
            Neg(a) => Expr::neg_s(a.diff(i)),
            Add(a, b) => Expr::add_s(a.diff(i), b.diff(i)),
            Sub(a, b) => Expr::sub_s(a.diff(i), b.diff(i)),
            Mul(a, b) => Expr::add_s(
                Expr::mul_s(a.diff(i), (**b).clone()),
                Expr::mul_s((**a).clone(), b.diff(i)),
            ),
            Div(a, b) => {
                let num = Expr::sub_s(
                    Expr::mul_s(a.diff(i), (**b).clone()),
                    Expr::mul_s((**a).clone(), b.diff(i)),
                );
                Expr::div_s(num, Expr::powi_s((**b).clone(), 2))
            }
            Pow(a, b) => {
                // d(a^b) = a^b (b' ln a + b a'/a)
                let db = b.diff(i);
                let da = a.diff(i);
                let base_term = Expr::mul_s(
                    Expr::mul_s((**b).clone(), Expr::pow_s((**a).clone(), Expr::sub_s((**b).clone(), Const(1.0)))),
                    da,
                );
                if db.is_zero() {
                    base_term
                } else {
                    Expr::add_s(base_term, Expr::mul_s(Expr::mul_s(self.clone(), Expr::call(Func::Log, (**a).clone())), db))
                }
            }
            PowI(a, n) => {
                let inner = if *n == 1 { Const(1.0) } else { Expr::powi_s((**a).clone(), n - 1) };
                Expr::mul_s(Expr::mul_s(Const(*n as f64), inner), a.diff(i))
            }
            Call(f, a) => {
                let da = a.diff(i);
                if da.is_zero() {
                    return Const(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::neg_s(Expr::call(Func::Sin, a)),
                    Func::Exp => self.clone(),
                    Func::Log => Expr::div_s(Const(1.0), a),
                    Func::Sqrt => Expr::div_s(Const(0.5), self.clone()),
                };
                Expr::mul_s(outer, da)
            }
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    /// `a + b` with constant folding.
    pub fn add_s(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    /// `a − b` with constant folding.
    pub fn sub_s(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg_s(b),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    /// `a · b` with constant folding.
    pub fn mul_s(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            _ if a.is_zero() || b.is_zero() => Expr::Const(0.0),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    /// `a / b` with constant folding.
    pub fn div_s(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x / y),
            _ if a.is_zero() => Expr::Const(0.0),
            _ if b.is_one() => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    /// `−a` with constant folding.
    pub fn neg_s(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(-x),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    fn powi_s(a: Expr, n: i32) -> Expr {
        match (&a, n) {
            (_, 0) => Expr::Const(1.0),
            (_, 1) => a,
            (Expr::Const(x), _) => Expr::Const(x.powi(n)),
            _ => Expr::PowI(Box::new(a), n),
        }
    }

    fn pow_s(a: Expr, b: Expr) -> Expr {
        match &b {
            Expr::Const(c) if c.fract() == 0.0 && c.abs() < i32::MAX as f64 => Expr::powi_s(a, *c as i32),
            _ => Expr::Pow(Box::new(a), Box::new(b)),
        }
    }

    /// Printable form using the given coordinate names.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl $tr for Expr {
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

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl ExprDisplay<'_> {
    fn prec(e: &Expr) -> u8 {
        match e {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) | Expr::PowI(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
        let p = Self::prec(e);
        let paren = p < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match e {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "-{:?}", -c)?
                } else {
                    write!(f, "{:?}", c)?
                }
            }
            Expr::Var(i) => match self.names.get(*i) {
                Some(n) => f.write_str(n)?,
                None => write!(f, "x{}", i + 1)?,
            },
            Expr::Neg(a) => {
                f.write_str("-")?;
                self.write(f, a, 3)?;
            }
            Expr::Add(a, b) => {
                self.write(f, a, 1)?;
                f.write_str(" + ")?;
                self.write(f, b, 2)?;
            }
            Expr::Sub(a, b) => {
                self.write(f, a, 1)?;
                f.write_str(" - ")?;
                self.write(f, b, 2)?;
            }
            Expr::Mul(a, b) => {
                self.write(f, a, 2)?;
                f.write_str("*")?;
                self.write(f, b, 3)?;
            }
            Expr::Div(a, b) => {
                self.write(f, a, 2)?;
                f.write_str("/")?;
                self.write(f, b, 3)?;
            }
            Expr::Pow(a, b) => {
                self.write(f, a, 5)?;
                f.write_str("^")?;
                self.write(f, b, 4)?;
            }
            Expr::PowI(a, n) => {
                self.write(f, a, 5)?;
                if *n < 0 {
                    write!(f, "^(-{})", -(*n as i64))?;
                } else {
                    write!(f, "^{}", n)?;
                }
            }
            Expr::Call(func, a) => {
                f.write_str(func.name())?;
                f.write_str("(")?;
                self.write(f, a, 0)?;
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.expr, 0)
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Num(f64),
    Ident(String),
    Str(String),
    Op(char),
    Newline,
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tline, col: tcol });
        if c == '\n' {
            push(&mut out, Tok::Newline);
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
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
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                line: tline,
                column: tcol,
                message: format!("malformed number `{text}`"),
            })?;
            col += i - start;
            push(&mut out, Tok::Num(v));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(Error::Syntax { line: tline, column: tcol, message: "unterminated string".into() });
            }
            let s: String = chars[start..i].iter().collect();
            col += i + 1 - (start - 1);
            i += 1;
            push(&mut out, Tok::Str(s));
            continue;
        }
        let op = match c {
            '\u{2212}' => '-',
            '\u{00b7}' | '\u{00d7}' => '*',
            _ => c,
        };
        if "+-*/^()[],;=".contains(op) {
            push(&mut out, Tok::Op(op));
            i += 1;
            col += 1;
            continue;
        }
        return Err(Error::Syntax { line, column: col, message: format!("unexpected character `{c}`") });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

pub(crate) struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    names: &'a [String],
    depth: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(toks: &'a [Token], names: &'a [String]) -> Self {
        Parser { toks, pos: 0, names, depth: 0 }
    }

    pub(crate) fn peek(&mut self) -> &Token {
        if self.depth > 0 {
            while self.toks[self.pos].tok == Tok::Newline {
                self.pos += 1;
            }
        }
        &self.toks[self.pos]
    }

    pub(crate) fn next(&mut self) -> Token {
        self.peek();
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn enter(&mut self) {
        self.depth += 1;
    }

    pub(crate) fn leave(&mut self) {
        self.depth -= 1;
    }

    pub(crate) fn syntax(t: &Token, message: impl Into<String>) -> Error {
        Error::Syntax { line: t.line, column: t.col, message: message.into() }
    }

    pub(crate) fn expect_op(&mut self, op: char) -> Result<Token> {
        let t = self.next();
        if t.tok == Tok::Op(op) {
            Ok(t)
        } else {
            Err(Self::syntax(&t, format!("expected `{op}`, found {}", describe(&t.tok))))
        }
    }

    pub(crate) fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Op('+') => {
                    self.next();
                    lhs = lhs + self.term()?;
                }
                Tok::Op('-') => {
                    self.next();
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Op('*') => {
                    self.next();
                    lhs = lhs * self.unary()?;
                }
                Tok::Op('/') => {
                    self.next();
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek().tok {
            Tok::Op('-') => {
                self.next();
                Ok(-self.unary()?)
            }
            Tok::Op('+') => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Op('^') {
            self.next();
            let exp = self.unary()?;
            return Ok(make_pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Const(*v)),
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(name) {
                    if self.peek().tok != Tok::Op('(') {
                        let n = self.next();
                        return Err(Self::syntax(&n, format!("expected `(` after `{name}`")));
                    }
                    self.next();
                    self.enter();
                    let arg = self.expr()?;
                    self.leave_close(')')?;
                    return Ok(Expr::call(f, arg));
                }
                match self.names.iter().position(|n| n == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(Error::UnknownSymbol { name: name.clone(), line: t.line, column: t.col }),
                }
            }
            Tok::Op('(') => {
                self.enter();
                let e = self.expr()?;
                self.leave_close(')')?;
                Ok(e)
            }
            other => Err(Self::syntax(&t, format!("expected an operand, found {}", describe(other)))),
        }
    }

    fn leave_close(&mut self, op: char) -> Result<()> {
        let t = self.next();
        self.leave();
        if t.tok == Tok::Op(op) {
            Ok(())
        } else {
            Err(Self::syntax(&t, format!("expected `{op}`, found {}", describe(&t.tok))))
        }
    }
}

fn make_pow(base: Expr, exp: Expr) -> Expr {
    let int_of = |c: f64| (c.fract() == 0.0 && c.abs() <= 64.0).then_some(c as i32);
    match &exp {
        Expr::Const(c) => {
            if let Some(n) = int_of(*c) {
                return base.powi(n);
            }
        }
        Expr::Neg(inner) => {
            if let Expr::Const(c) = inner.as_ref() {
                if let Some(n) = int_of(*c) {
                    return base.powi(-n);
                }
            }
        }
        _ => {}
    }
    Expr::Pow(Box::new(base), Box::new(exp))
}

pub(crate) fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Str(s) => format!("string \"{s}\""),
        Tok::Op(c) => format!("`{c}`"),
        Tok::Newline => "end of line".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a standalone expression over the given coordinate names.
pub fn parse_expr(src: &str, names: &[String]) -> Result<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser::new(&toks, names);
    p.enter();
    let e = p.expr()?;
    let t = p.next();
    if t.tok != Tok::Eof {
        return Err(Parser::syntax(&t, format!("unexpected {}", describe(&t.tok))));
    }
    Ok(e)
}
