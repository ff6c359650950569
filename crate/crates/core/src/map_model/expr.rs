//! Expression language for branch definitions: parsing, printing, evaluation
//! and symbolic differentiation.
//!
//! Grammar (`^` binds tightest and is right-associative, unary minus binds
//! looser than `^`, so `-x^2` is `-(x^2)`):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp' | 'log' | 'sqrt'
//! ```

use std::fmt;
use std::str::FromStr;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprNode {
    Const(f64),
    Var,
    Neg(Box<ExprNode>),
    Bin(BinOp, Box<ExprNode>, Box<ExprNode>),
    Func(Func, Box<ExprNode>),
}

use ExprNode::*;

fn c(v: f64) -> ExprNode {
    Const(v)
}

fn bin(op: BinOp, a: ExprNode, b: ExprNode) -> ExprNode {
    Bin(op, Box::new(a), Box::new(b))
}

fn neg(a: ExprNode) -> ExprNode {
    Neg(Box::new(a))
}

fn func(f: Func, a: ExprNode) -> ExprNode {
    ExprNode::Func(f, Box::new(a))
}

impl ExprNode {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn constant(v: f64) -> Self {
        Const(v)
    }

    pub fn var() -> Self {
        Var
    }

    /// `slope * x + offset`.
    pub fn affine(slope: f64, offset: f64) -> Self {
        bin(BinOp::Add, bin(BinOp::Mul, c(slope), Var), c(offset)).simplify()
    }

    pub fn eval<F: Float>(&self, x: F) -> F {
        let k = |v: f64| F::from(v).expect("constant representable");
        match self {
            Const(v) => k(*v),
            Var => x,
            Neg(a) => -a.eval(x),
            Bin(op, a, b) => {
                let (u, v) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => u + v,
                    BinOp::Sub => u - v,
                    BinOp::Mul => u * v,
                    BinOp::Div => u / v,
                    BinOp::Pow => pow(u, v),
                }
            }
            ExprNode::Func(f, a) => {
                let u = a.eval(x);
                match f {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Exp => u.exp(),
                    Func::Log => u.ln(),
                    Func::Sqrt => u.sqrt(),
                }
            }
        }
    }

    /// Exact evaluation for rational expressions (no functions, integer powers).
    pub fn eval_exact<T: Scalar>(&self, x: &T) -> Option<T> {
        Some(match self {
            Const(v) => T::parse_literal(&format_const(*v))?,
            Var => x.clone(),
            Neg(a) => -a.eval_exact(x)?,
            Bin(op, a, b) => {
                let u = a.eval_exact(x)?;
                if *op == BinOp::Pow {
                    if b.depends_on_x() {
                        return None;
                    }
                    let e = b.eval(0.0f64);
                    if e.fract() != 0.0 || e.abs() > 64.0 {
                        return None;
                    }
                    let e = e as i64;
                    let p = u.powi_exact(e.unsigned_abs() as u32);
                    return if e >= 0 {
                        Some(p)
                    } else if p.is_zero() {
                        None
                    } else {
                        Some(T::one() / p)
                    };
                }
                let v = b.eval_exact(x)?;
                match op {
                    BinOp::Add => u + v,
                    BinOp::Sub => u - v,
                    BinOp::Mul => u * v,
                    BinOp::Div => {
                        if v.is_zero() {
                            return None;
                        }
                        u / v
                    }
                    BinOp::Pow => unreachable!(),
                }
            }
            ExprNode::Func(..) => return None,
        })
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Const(_))
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            Const(_) => false,
            Var => true,
            Neg(a) | ExprNode::Func(_, a) => a.depends_on_x(),
            Bin(_, a, b) => a.depends_on_x() || b.depends_on_x(),
        }
    }

    /// Exact symbolic derivative with respect to `x`, simplified.
    pub fn differentiate(&self) -> Self {
        self.diff_raw().simplify()
    }

    fn diff_raw(&self) -> Self {
        match self {
            Const(_) => c(0.0),
            Var => c(1.0),
            Neg(a) => neg(a.diff_raw()),
            Bin(op, a, b) => {
                let (da, db) = (a.diff_raw(), b.diff_raw());
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinOp::Add => bin(BinOp::Add, da, db),
                    BinOp::Sub => bin(BinOp::Sub, da, db),
                    BinOp::Mul => bin(BinOp::Add, bin(BinOp::Mul, da, b), bin(BinOp::Mul, a, db)),
                    BinOp::Div => bin(
                        BinOp::Div,
                        bin(BinOp::Sub, bin(BinOp::Mul, da, b.clone()), bin(BinOp::Mul, a, db)),
                        bin(BinOp::Pow, b, c(2.0)),
                    ),
                    BinOp::Pow => {
                        if !b.depends_on_x() {
                            // b * a^(b-1) * a'
                            bin(
                                BinOp::Mul,
                                bin(BinOp::Mul, b.clone(), bin(BinOp::Pow, a, bin(BinOp::Sub, b, c(1.0)))),
                                da,
                            )
                        } else if !a.depends_on_x() {
                            // a^b * log(a) * b'
                            bin(BinOp::Mul, bin(BinOp::Mul, self.clone(), func(Func::Log, a)), db)
                        } else {
                            // a^b * (b' log a + b a' / a)
                            bin(
                                BinOp::Mul,
                                self.clone(),
                                bin(
                                    BinOp::Add,
                                    bin(BinOp::Mul, db, func(Func::Log, a.clone())),
                                    bin(BinOp::Div, bin(BinOp::Mul, b, da), a),
                                ),
                            )
                        }
                    }
                }
            }
            ExprNode::Func(f, a) => {
                let da = a.diff_raw();
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => func(Func::Cos, a),
                    Func::Cos => neg(func(Func::Sin, a)),
                    Func::Exp => func(Func::Exp, a),
                    Func::Log => bin(BinOp::Div, c(1.0), a),
                    Func::Sqrt => bin(BinOp::Div, c(1.0), bin(BinOp::Mul, c(2.0), func(Func::Sqrt, a))),
                };
                bin(BinOp::Mul, outer, da)
            }
        }
    }

    /// Constant folding and algebraic identities; preserves values.
    pub fn simplify(&self) -> Self {
        match self {
            Const(_) | Var => self.clone(),
            Neg(a) => match a.simplify() {
                Const(v) => c(-v),
                Neg(inner) => *inner,
                s => neg(s),
            },
            ExprNode::Func(f, a) => {
                let s = a.simplify();
                if let Const(v) = s {
                    let r = func(*f, c(v)).eval(0.0f64);
                    if r.is_finite() {
                        return c(r);
                    }
                }
                func(*f, s)
            }
            Bin(op, a, b) => simplify_bin(*op, a.simplify(), b.simplify()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Const(_) | Var => 1,
            Neg(a) | ExprNode::Func(_, a) => 1 + a.node_count(),
            Bin(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Ascending coefficients when the expression is a polynomial in `x`
    /// (integer powers, division by constants only).
    pub fn to_polynomial(&self) -> Option<Vec<f64>> {
        let mut p = match self {
            Const(v) => vec![*v],
            Var => vec![0.0, 1.0],
            Neg(a) => a.to_polynomial()?.into_iter().map(|c| -c).collect(),
            ExprNode::Func(..) => {
                if self.depends_on_x() {
                    return None;
                }
                vec![self.eval(0.0)]
            }
            Bin(op, a, b) => {
                let pa = a.to_polynomial()?;
                match op {
                    BinOp::Add | BinOp::Sub => {
                        let pb = b.to_polynomial()?;
                        let sign = if *op == BinOp::Add { 1.0 } else { -1.0 };
                        (0..pa.len().max(pb.len()))
                            .map(|i| pa.get(i).copied().unwrap_or(0.0) + sign * pb.get(i).copied().unwrap_or(0.0))
                            .collect()
                    }
                    BinOp::Mul => poly_mul_f64(&pa, &b.to_polynomial()?),
                    BinOp::Div => {
                        if b.depends_on_x() {
                            return None;
                        }
                        let d = b.eval(0.0);
                        pa.into_iter().map(|c| c / d).collect()
                    }
                    BinOp::Pow => {
                        if b.depends_on_x() {
                            return None;
                        }
                        let e = b.eval(0.0);
                        if e < 0.0 || e.fract() != 0.0 || e > 64.0 {
                            return None;
                        }
                        (0..e as usize).fold(vec![1.0], |acc, _| poly_mul_f64(&acc, &pa))
                    }
                }
            }
        };
        while p.len() > 1 && p.last() == Some(&0.0) {
            p.pop();
        }
        Some(p)
    }

    fn precedence(&self) -> u8 {
        match self {
            Const(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            Const(_) | Var | ExprNode::Func(..) => 5,
            Neg(_) => 3,
            Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Bin(BinOp::Pow, ..) => 4,
        }
    }
}

fn pow<F: Float>(u: F, v: F) -> F {
    // integer exponents of negative bases stay real
    if v == v.round() && v.abs() <= F::from(1024.0).unwrap() {
        return u.powi(v.to_i32().unwrap_or(0));
    }
    u.powf(v)
}

fn simplify_bin(op: BinOp, a: ExprNode, b: ExprNode) -> ExprNode {
    if let (Const(x), Const(y)) = (&a, &b) {
        let r = bin(op, c(*x), c(*y)).eval(0.0f64);
        if r.is_finite() {
            return c(r);
        }
    }
    let is = |e: &ExprNode, v: f64| matches!(e, Const(x) if *x == v);
    match op {
        BinOp::Add => {
            if is(&a, 0.0) {
                return b;
            }
            if is(&b, 0.0) {
                return a;
            }
            match b {
                Neg(inner) => simplify_bin(BinOp::Sub, a, *inner),
                Const(v) if v < 0.0 => bin(BinOp::Sub, a, c(-v)),
                _ => match a {
                    Neg(inner) => simplify_bin(BinOp::Sub, b, *inner),
                    _ => bin(BinOp::Add, a, b),
                },
            }
        }
        BinOp::Sub => {
            if is(&b, 0.0) {
                return a;
            }
            if is(&a, 0.0) {
                return neg(b).simplify();
            }
            match b {
                Neg(inner) => simplify_bin(BinOp::Add, a, *inner),
                Const(v) if v < 0.0 => bin(BinOp::Add, a, c(-v)),
                _ => bin(BinOp::Sub, a, b),
            }
        }
        BinOp::Mul => {
            if is(&a, 0.0) || is(&b, 0.0) {
                return c(0.0);
            }
            if is(&a, 1.0) {
                return b;
            }
            if is(&b, 1.0) {
                return a;
            }
            if is(&a, -1.0) {
                return neg(b).simplify();
            }
            if is(&b, -1.0) {
                return neg(a).simplify();
            }
            match (a, b) {
                (Neg(x), y) | (y, Neg(x)) => neg(simplify_bin(BinOp::Mul, *x, y)),
                (x, Const(v)) if !x.is_const() => simplify_bin(BinOp::Mul, c(v), x),
                (Const(u), Bin(BinOp::Mul, x, y)) if x.is_const() => {
                    simplify_bin(BinOp::Mul, simplify_bin(BinOp::Mul, c(u), *x), *y)
                }
                (x, y) => bin(BinOp::Mul, x, y),
            }
        }
        BinOp::Div => {
            if is(&a, 0.0) && !is(&b, 0.0) {
                return c(0.0);
            }
            if is(&b, 1.0) {
                return a;
            }
            match (a, b) {
                (Neg(x), y) => neg(simplify_bin(BinOp::Div, *x, y)),
                (x, y) => bin(BinOp::Div, x, y),
            }
        }
        BinOp::Pow => {
            if is(&b, 1.0) {
                return a;
            }
            if is(&b, 0.0) {
                return c(1.0);
            }
            bin(BinOp::Pow, a, b)
        }
    }
}

/// Shortest round-tripping text for a constant.
fn format_const(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &ExprNode, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Const(v) => {
                if v.is_sign_negative() && *v == 0.0 {
                    write!(f, "-0")
                } else {
                    write!(f, "{}", format_const(*v))
                }
            }
            Var => write!(f, "x"),
            Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, a.precedence() <= 3)
            }
            ExprNode::Func(func, a) => write!(f, "{}({a})", func.name()),
            Bin(op, a, b) => {
                let p = self.precedence();
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                if *op == BinOp::Pow {
                    wrap(f, a, a.precedence() <= 4)?;
                    write!(f, "{sym}")?;
                    wrap(f, b, b.precedence() < 4)
                } else {
                    wrap(f, a, a.precedence() < p)?;
                    write!(f, "{sym}")?;
                    wrap(f, b, b.precedence() <= p)
                }
            }
        }
    }
}

impl FromStr for ExprNode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Syntax { pos: self.pos, msg: msg.to_string() }
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

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", ch as char)))
        }
    }

    fn expr(&mut self) -> Result<ExprNode> {
        let mut lhs = self.term()?;
        while let Some(ch @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = bin(if ch == b'+' { BinOp::Add } else { BinOp::Sub }, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprNode> {
        let mut lhs = self.unary()?;
        while let Some(ch @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = bin(if ch == b'*' { BinOp::Mul } else { BinOp::Div }, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprNode> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprNode> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprNode> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(ch) if ch.is_ascii_digit() || ch == b'.' => self.number(),
            Some(ch) if ch.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                if name == "x" {
                    return Ok(Var);
                }
                match Func::from_name(name) {
                    Some(f) => {
                        self.expect(b'(')?;
                        let arg = self.expr()?;
                        self.expect(b')')?;
                        Ok(func(f, arg))
                    }
                    None => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier '{name}'")))
                    }
                }
            }
            Some(ch) => Err(self.error(&format!("unexpected character '{}'", ch as char))),
        }
    }

    fn number(&mut self) -> Result<ExprNode> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Const).map_err(|_| Error::Syntax { pos: start, msg: "malformed number".into() })
    }
}

fn poly_mul_f64(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
